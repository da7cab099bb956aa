use crate::error::{Error, Result};

use super::LossCurve;

/// Resamples `curve` onto `target_len` uniformly spaced points spanning its
/// first to last epoch. The result is indexed by epochs `0..target_len`.
///
/// Interpolation runs over the epoch values, so uniformly spaced input is
/// treated positionally and gaps in the epoch sequence are respected.
pub fn resample_linear(curve: &LossCurve, target_len: usize) -> Result<LossCurve> {
    curve.require_len(2)?;
    if target_len < 2 {
        return Err(Error::InvalidInput(format!(
            "target length must be at least 2, got {target_len}"
        )));
    }
    let xs: Vec<f64> = curve.epochs().iter().map(|&e| e as f64).collect();
    let values = interpolate(&xs, curve.values(), target_len);
    LossCurve::from_values(values)
}

/// Positional resampling of a raw value slice (length ≥ 2).
pub(crate) fn resample_values(values: &[f64], target_len: usize) -> Vec<f64> {
    debug_assert!(values.len() >= 2 && target_len >= 2);
    if values.len() == target_len {
        return values.to_vec();
    }
    let xs: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
    interpolate(&xs, values, target_len)
}

fn interpolate(xs: &[f64], ys: &[f64], target_len: usize) -> Vec<f64> {
    let n = xs.len();
    let first = xs[0];
    let span = xs[n - 1] - first;
    let last_slot = (target_len - 1) as f64;
    let mut out = Vec::with_capacity(target_len);
    let mut seg = 0;
    for k in 0..target_len {
        if k == 0 {
            out.push(ys[0]);
            continue;
        }
        if k == target_len - 1 {
            out.push(ys[n - 1]);
            continue;
        }
        let x = first + (k as f64 * span) / last_slot;
        while seg + 2 < n && xs[seg + 1] <= x {
            seg += 1;
        }
        let (x0, x1) = (xs[seg], xs[seg + 1]);
        let (y0, y1) = (ys[seg], ys[seg + 1]);
        let t = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
        let y = if t == 0.0 {
            y0
        } else if t == 1.0 {
            y1
        } else {
            (y0 + t * (y1 - y0)).clamp(y0.min(y1), y0.max(y1))
        };
        out.push(y);
    }
    out
}

/// Trailing moving average; early points average over what is available.
pub fn moving_average(curve: &LossCurve, window: usize) -> Result<LossCurve> {
    if window == 0 {
        return Err(Error::InvalidInput("moving-average window must be ≥ 1".into()));
    }
    let values = curve.values();
    let smoothed = (0..values.len())
        .map(|i| trailing_mean(&values[..=i], window))
        .collect();
    LossCurve::new(curve.epochs().to_vec(), smoothed)
}

/// Mean of the last `window` entries of `prefix`.
pub(crate) fn trailing_mean(prefix: &[f64], window: usize) -> f64 {
    let start = prefix.len().saturating_sub(window);
    let tail = &prefix[start..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Zero-mean, unit population-sd rescaling. Constant input maps to zeros.
pub fn z_normalize(curve: &LossCurve) -> LossCurve {
    let values = z_normalize_values(curve.values());
    LossCurve::new(curve.epochs().to_vec(), values).expect("z-normalization keeps values finite")
}

pub(crate) fn z_normalize_values(values: &[f64]) -> Vec<f64> {
    let (mean, sd) = mean_sd(values);
    let constant = values.windows(2).all(|w| w[0] == w[1]);
    if constant || sd == 0.0 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / sd).collect()
}

/// Mean and population standard deviation.
pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Least-squares slope of `values` against their positions.
pub(crate) fn ls_slope(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 || values.windows(2).all(|w| w[0] == w[1]) {
        return 0.0;
    }
    let x_mean = (n - 1) as f64 / 2.0;
    let y_mean = values.iter().sum::<f64>() / n as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &y) in values.iter().enumerate() {
        let dx = i as f64 - x_mean;
        num += dx * (y - y_mean);
        den += dx * dx;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(values: &[f64]) -> LossCurve {
        LossCurve::from_values(values.to_vec()).unwrap()
    }

    fn assert_close(actual: &[f64], expected: &[f64], tol: f64) {
        assert_eq!(actual.len(), expected.len());
        for (a, e) in actual.iter().zip(expected) {
            assert!((a - e).abs() <= tol, "{actual:?} vs {expected:?}");
        }
    }

    #[test]
    fn resample_linear_endpoints() {
        let out = resample_linear(&curve(&[0.0, 1.0]), 3).unwrap();
        assert_eq!(out.values(), &[0.0, 0.5, 1.0]);
        assert_eq!(out.epochs(), &[0, 1, 2]);
    }

    #[test]
    fn resample_identity_at_same_length() {
        let values = [0.3, 0.9, 0.1, 0.7, 0.25];
        let out = resample_linear(&curve(&values), values.len()).unwrap();
        assert_eq!(out.values(), &values);
    }

    #[test]
    fn resample_v_shape_to_five_points() {
        let out = resample_linear(&curve(&[2.0, 0.0, 2.0]), 5).unwrap();
        assert_close(out.values(), &[2.0, 1.0, 0.0, 1.0, 2.0], 1e-12);
    }

    #[test]
    fn resample_uses_epoch_values_for_gaps() {
        // epochs 0, 1, 4: value at epoch 2 lies on the 1→4 segment
        let c = LossCurve::new(vec![0, 1, 4], vec![0.0, 1.0, 4.0]).unwrap();
        let out = resample_linear(&c, 5).unwrap();
        assert_close(out.values(), &[0.0, 1.0, 2.0, 3.0, 4.0], 1e-12);
    }

    #[test]
    fn resample_rejects_short_input() {
        assert!(matches!(
            resample_linear(&curve(&[1.0]), 4),
            Err(Error::InvalidCurve(_))
        ));
        assert!(resample_linear(&curve(&[1.0, 2.0]), 1).is_err());
    }

    #[test]
    fn moving_average_examples() {
        let out = moving_average(&curve(&[1.0, 3.0, 5.0, 7.0]), 2).unwrap();
        assert_eq!(out.values(), &[1.0, 2.0, 4.0, 6.0]);
        let out = moving_average(&curve(&[2.0, 2.0, 8.0]), 3).unwrap();
        assert_eq!(out.values(), &[2.0, 2.0, 4.0]);
        let c = curve(&[0.4, 0.1, 0.9]);
        assert_eq!(moving_average(&c, 1).unwrap(), c);
        assert!(moving_average(&c, 0).is_err());
    }

    #[test]
    fn z_normalize_examples() {
        assert_eq!(z_normalize(&curve(&[0.0, 0.0, 0.0])).values(), &[0.0, 0.0, 0.0]);
        assert_close(z_normalize(&curve(&[-1.0, 1.0])).values(), &[-1.0, 1.0], 1e-12);
        let s = (2.0f64 / 3.0).sqrt();
        assert_close(
            z_normalize(&curve(&[1.0, 2.0, 3.0])).values(),
            &[-1.0 / s, 0.0, 1.0 / s],
            1e-12,
        );
        assert_close(
            z_normalize(&curve(&[1.0, 2.0, 3.0])).values(),
            &[-1.2247, 0.0, 1.2247],
            1e-4,
        );
        // inexact constant still maps to zeros
        assert_eq!(z_normalize(&curve(&[0.1, 0.1, 0.1])).values(), &[0.0; 3]);
    }

    #[test]
    fn slope_of_line() {
        assert!((ls_slope(&[1.0, 3.0, 5.0, 7.0]) - 2.0).abs() < 1e-12);
        assert_eq!(ls_slope(&[4.0, 4.0, 4.0]), 0.0);
    }

    fn values_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0f64..100.0, 2..60)
    }

    proptest! {
        #[test]
        fn resample_idempotent(values in values_strategy(), len in 2usize..120) {
            let once = resample_linear(&curve(&values), len).unwrap();
            let twice = resample_linear(&once, len).unwrap();
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn resample_stays_in_bounds(values in values_strategy(), len in 2usize..120) {
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let out = resample_linear(&curve(&values), len).unwrap();
            prop_assert_eq!(out.values()[0], values[0]);
            prop_assert_eq!(*out.values().last().unwrap(), *values.last().unwrap());
            for v in out.values() {
                prop_assert!(*v >= lo && *v <= hi);
            }
        }

        #[test]
        fn moving_average_within_running_range(values in values_strategy(), window in 1usize..12) {
            let out = moving_average(&curve(&values), window).unwrap();
            for (i, v) in out.values().iter().enumerate() {
                let span = &values[i.saturating_sub(window - 1)..=i];
                let lo = span.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = span.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
            }
        }

        #[test]
        fn z_normalize_affine_invariant(
            values in values_strategy(),
            scale in 0.01f64..100.0,
            shift in -100.0f64..100.0,
        ) {
            let base = z_normalize(&curve(&values));
            let moved: Vec<f64> = values.iter().map(|v| scale * v + shift).collect();
            let moved = z_normalize(&curve(&moved));
            let constant = base.values().iter().all(|v| *v == 0.0);
            for (a, b) in base.values().iter().zip(moved.values()) {
                if !constant {
                    prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
                }
            }
        }

        #[test]
        fn z_normalize_moments(values in values_strategy()) {
            let z = z_normalize(&curve(&values));
            let (mean, sd) = mean_sd(z.values());
            if z.values().iter().any(|v| *v != 0.0) {
                prop_assert!(mean.abs() <= 1e-9);
                prop_assert!((sd - 1.0).abs() <= 1e-9);
            }
        }
    }
}
