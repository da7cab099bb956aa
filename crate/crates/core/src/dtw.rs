//! Dynamic time warping: the exact dynamic program and the multiscale
//! FastDTW approximation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RADIUS: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtwMode {
    Exact,
    #[default]
    Fast,
}

/// Local cost between two aligned points.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointCost {
    #[default]
    Absolute,
    Squared,
}

impl PointCost {
    #[inline]
    fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            PointCost::Absolute => (x - y).abs(),
            PointCost::Squared => (x - y) * (x - y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DtwParams {
    pub mode: DtwMode,
    /// FastDTW neighbourhood radius; ignored in exact mode.
    pub radius: usize,
    #[serde(default)]
    pub cost: PointCost,
}

impl Default for DtwParams {
    fn default() -> Self {
        DtwParams {
            mode: DtwMode::Fast,
            radius: DEFAULT_RADIUS,
            cost: PointCost::Absolute,
        }
    }
}

impl DtwParams {
    pub fn exact() -> Self {
        DtwParams {
            mode: DtwMode::Exact,
            ..Default::default()
        }
    }

    pub fn fast(radius: usize) -> Self {
        DtwParams {
            mode: DtwMode::Fast,
            radius,
            ..Default::default()
        }
    }
}

fn check_input(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("DTW needs non-empty sequences".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("DTW input holds non-finite values".into()));
    }
    Ok(())
}

/// Minimum cumulative absolute-difference alignment cost.
pub fn dtw_exact(a: &[f64], b: &[f64]) -> Result<f64> {
    check_input(a, b)?;
    Ok(exact_cost(a, b, PointCost::Absolute))
}

/// FastDTW with the given radius and absolute-difference cost.
pub fn dtw_fast(a: &[f64], b: &[f64], radius: usize) -> Result<f64> {
    check_input(a, b)?;
    Ok(fast_with_path(a, b, radius, PointCost::Absolute).0)
}

/// Distance under `params`, dispatching on the mode.
pub fn distance(a: &[f64], b: &[f64], params: &DtwParams) -> Result<f64> {
    check_input(a, b)?;
    Ok(match params.mode {
        DtwMode::Exact => exact_cost(a, b, params.cost),
        DtwMode::Fast => fast_with_path(a, b, params.radius, params.cost).0,
    })
}

/// Two-row dynamic program over the full cost matrix.
fn exact_cost(a: &[f64], b: &[f64], cost: PointCost) -> f64 {
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut curr = vec![f64::INFINITY; m];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            let best = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => curr[j - 1],
                (_, 0) => prev[0],
                _ => prev[j - 1].min(prev[j]).min(curr[j - 1]),
            };
            curr[j] = cost.eval(x, y) + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m - 1]
}

/// Per-row inclusive column ranges of the cells a constrained DP may visit.
struct Window {
    lo: Vec<usize>,
    hi: Vec<usize>,
}

impl Window {
    fn full(n: usize, m: usize) -> Self {
        Window {
            lo: vec![0; n],
            hi: vec![m - 1; n],
        }
    }

    /// Projects a coarse warping path onto the finer grid and widens it by
    /// `radius` cells.
    fn from_coarse_path(path: &[(usize, usize)], n: usize, m: usize, radius: usize) -> Self {
        let mut lo = vec![usize::MAX; n];
        let mut hi = vec![0; n];
        let r = radius as isize;
        for &(ci, cj) in path {
            for di in -r..=r {
                let i = ci as isize + di;
                if i < 0 {
                    continue;
                }
                let j_lo = (cj as isize - r).max(0) as usize;
                let j_hi = cj + radius;
                for fi in [2 * i as usize, 2 * i as usize + 1] {
                    if fi >= n {
                        continue;
                    }
                    let f_lo = 2 * j_lo;
                    let f_hi = (2 * j_hi + 1).min(m - 1);
                    if f_lo > f_hi {
                        continue;
                    }
                    lo[fi] = lo[fi].min(f_lo);
                    hi[fi] = hi[fi].max(f_hi);
                }
            }
        }
        // Rows the projection misses inherit their neighbour's span.
        for i in 0..n {
            if lo[i] == usize::MAX {
                let (l, h) = if i > 0 { (lo[i - 1], hi[i - 1]) } else { (0, 0) };
                lo[i] = l;
                hi[i] = h;
            }
        }
        lo[0] = 0;
        hi[n - 1] = m - 1;
        // Consecutive rows must overlap so a monotone path exists.
        for i in 1..n {
            if lo[i] > hi[i - 1] {
                lo[i] = hi[i - 1];
            }
            if hi[i] < lo[i] {
                hi[i] = lo[i];
            }
        }
        for i in (0..n - 1).rev() {
            if hi[i] < lo[i + 1] {
                hi[i] = lo[i + 1];
            }
        }
        Window { lo, hi }
    }
}

fn coarsen(x: &[f64]) -> Vec<f64> {
    x.chunks(2)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

/// Radius used when refining the coarse guide paths. Only the finest level
/// uses the caller's radius, so the final search window grows monotonically
/// with it.
const GUIDE_RADIUS: usize = DEFAULT_RADIUS;

fn fast_with_path(
    a: &[f64],
    b: &[f64],
    radius: usize,
    cost: PointCost,
) -> (f64, Vec<(usize, usize)>) {
    if a.len() <= radius + 2 || b.len() <= radius + 2 {
        return windowed_dtw(a, b, &Window::full(a.len(), b.len()), cost);
    }
    let (_, guide) = multiscale(&coarsen(a), &coarsen(b), GUIDE_RADIUS, cost);
    let window = Window::from_coarse_path(&guide, a.len(), b.len(), radius);
    windowed_dtw(a, b, &window, cost)
}

/// Classic FastDTW recursion: coarsen by two, solve, project, refine.
fn multiscale(
    a: &[f64],
    b: &[f64],
    radius: usize,
    cost: PointCost,
) -> (f64, Vec<(usize, usize)>) {
    if a.len() <= radius + 2 || b.len() <= radius + 2 {
        return windowed_dtw(a, b, &Window::full(a.len(), b.len()), cost);
    }
    let (_, coarse_path) = multiscale(&coarsen(a), &coarsen(b), radius, cost);
    let window = Window::from_coarse_path(&coarse_path, a.len(), b.len(), radius);
    windowed_dtw(a, b, &window, cost)
}

/// Dynamic program restricted to `window`, returning cost and warping path.
fn windowed_dtw(
    a: &[f64],
    b: &[f64],
    window: &Window,
    cost: PointCost,
) -> (f64, Vec<(usize, usize)>) {
    let n = a.len();
    let rows: Vec<Vec<f64>> = {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let (lo, hi) = (window.lo[i], window.hi[i]);
            let mut row = vec![f64::INFINITY; hi - lo + 1];
            for j in lo..=hi {
                let up = |di: usize, dj: usize| -> f64 {
                    if i < di || j < dj {
                        return f64::INFINITY;
                    }
                    let (pi, pj) = (i - di, j - dj);
                    if di == 0 {
                        if pj >= lo {
                            row[pj - lo]
                        } else {
                            f64::INFINITY
                        }
                    } else {
                        let (plo, phi) = (window.lo[pi], window.hi[pi]);
                        if pj >= plo && pj <= phi {
                            rows[pi][pj - plo]
                        } else {
                            f64::INFINITY
                        }
                    }
                };
                let best = if i == 0 && j == 0 {
                    0.0
                } else {
                    up(1, 1).min(up(1, 0)).min(up(0, 1))
                };
                row[j - lo] = cost.eval(a[i], b[j]) + best;
            }
            rows.push(row);
        }
        rows
    };

    let at = |i: usize, j: usize| -> f64 {
        let (lo, hi) = (window.lo[i], window.hi[i]);
        if j >= lo && j <= hi {
            rows[i][j - lo]
        } else {
            f64::INFINITY
        }
    };

    let (mut i, mut j) = (n - 1, b.len() - 1);
    let total = at(i, j);
    let mut path = vec![(i, j)];
    while i > 0 || j > 0 {
        let step = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = at(i - 1, j - 1);
            let left = at(i - 1, j);
            let down = at(i, j - 1);
            if diag <= left && diag <= down {
                (i - 1, j - 1)
            } else if left <= down {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        (i, j) = step;
        path.push((i, j));
    }
    path.reverse();
    (total, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_sequences_cost_nothing() {
        assert_eq!(dtw_exact(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        for r in 0..4 {
            assert_eq!(dtw_fast(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], r).unwrap(), 0.0);
        }
    }

    #[test]
    fn shifted_ramp() {
        assert_eq!(dtw_exact(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap(), 2.0);
    }

    #[test]
    fn single_cells() {
        assert_eq!(dtw_exact(&[0.0], &[5.0]).unwrap(), 5.0);
        assert!(matches!(dtw_exact(&[], &[1.0]), Err(Error::InvalidInput(_))));
        assert!(dtw_fast(&[1.0], &[], 3).is_err());
        assert!(dtw_exact(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn squared_cost_option() {
        let p = DtwParams {
            cost: PointCost::Squared,
            ..DtwParams::exact()
        };
        assert_eq!(distance(&[0.0], &[3.0], &p).unwrap(), 9.0);
    }

    #[test]
    fn fast_path_is_a_valid_warping_path() {
        let a: Vec<f64> = (0..57).map(|i| (i as f64 * 0.3).sin()).collect();
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.45).cos()).collect();
        let (cost, path) = fast_with_path(&a, &b, 1, PointCost::Absolute);
        assert_eq!(path[0], (0, 0));
        assert_eq!(*path.last().unwrap(), (56, 39));
        for w in path.windows(2) {
            let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            assert!(di <= 1 && dj <= 1 && di + dj >= 1);
        }
        let along: f64 = path.iter().map(|&(i, j)| (a[i] - b[j]).abs()).sum();
        assert!((along - cost).abs() < 1e-9);
    }

    fn seq() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 1..48)
    }

    proptest! {
        #[test]
        fn exact_is_symmetric(a in seq(), b in seq()) {
            let ab = dtw_exact(&a, &b).unwrap();
            let ba = dtw_exact(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12);
        }

        #[test]
        fn self_distance_is_zero(a in seq()) {
            prop_assert_eq!(dtw_exact(&a, &a).unwrap(), 0.0);
        }

        #[test]
        fn endpoint_cells_bound_the_cost(a in seq(), b in seq()) {
            let d = dtw_exact(&a, &b).unwrap();
            let first = (a[0] - b[0]).abs();
            let last = (a[a.len() - 1] - b[b.len() - 1]).abs();
            prop_assert!(d >= first.max(last) - 1e-12);
        }

        #[test]
        fn fast_never_undercuts_exact(a in seq(), b in seq(), r in 0usize..6) {
            let exact = dtw_exact(&a, &b).unwrap();
            let fast = dtw_fast(&a, &b, r).unwrap();
            prop_assert!(fast >= exact - 1e-9);
        }

        #[test]
        fn full_radius_matches_exact(a in seq(), b in seq()) {
            let r = a.len().max(b.len());
            let exact = dtw_exact(&a, &b).unwrap();
            prop_assert!((dtw_fast(&a, &b, r).unwrap() - exact).abs() <= 1e-9);
        }

        #[test]
        fn larger_radius_never_costs_more(a in seq(), b in seq(), r in 0usize..5) {
            let small = dtw_fast(&a, &b, r).unwrap();
            let large = dtw_fast(&a, &b, r + 1).unwrap();
            prop_assert!(large <= small + 1e-9, "r={} small={} large={}", r, small, large);
        }
    }
}
