//! Parametric loss curves with known labels.
//!
//! Both families decay exponentially towards a plateau. In the overfit
//! family the validation loss stops improving at the onset epoch and then
//! rises linearly while the training loss keeps falling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{LossCurve, OverfitLabel, TrainingHistory};
use crate::seed;

use super::data::gaussian;

/// Validation-set size used to quantize the derived accuracy curve.
const ACCURACY_RESOLUTION: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveFamily {
    Overfit,
    NonOverfit,
}

impl CurveFamily {
    pub fn label(self) -> OverfitLabel {
        match self {
            CurveFamily::Overfit => OverfitLabel::Overfit,
            CurveFamily::NonOverfit => OverfitLabel::NonOverfit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCurveSpec {
    pub family: CurveFamily,
    pub length: usize,
    /// Loss at epoch 0.
    pub initial_loss: f64,
    /// e-foldings of the decay over the whole run.
    pub decay_rate: f64,
    /// Validation plateau as a fraction of the initial loss.
    pub plateau: f64,
    /// Fraction of the run after which validation loss rises (overfit only).
    pub onset_frac: f64,
    /// Validation rise over the whole run length, in units of the initial loss.
    pub divergence_slope: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SyntheticCurveSpec {
    pub fn new(family: CurveFamily, length: usize, seed: u64) -> Self {
        SyntheticCurveSpec {
            family,
            length,
            initial_loss: 1.0,
            decay_rate: 5.0,
            plateau: 0.3,
            onset_frac: 0.5,
            divergence_slope: 1.0,
            noise_sd: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::ConfigError(m));
        if self.length < 50 {
            return err(format!("synthetic curves need at least 50 epochs, got {}", self.length));
        }
        if !(self.initial_loss > 0.0 && self.initial_loss.is_finite()) {
            return err("initial loss must be positive".into());
        }
        if !(self.decay_rate > 0.0) || !(0.0..1.0).contains(&self.plateau) || !(self.divergence_slope > 0.0) {
            return err("decay rate and divergence slope must be positive, plateau in [0, 1)".into());
        }
        if self.family == CurveFamily::Overfit && !(self.onset_frac > 0.2 && self.onset_frac < 0.8) {
            return err(format!("onset fraction {} outside (0.2, 0.8)", self.onset_frac));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd < 0.2 * self.initial_loss) {
            return err(format!(
                "noise sd {} must lie in [0, 0.2 x initial loss)",
                self.noise_sd
            ));
        }
        Ok(())
    }

    pub fn onset_epoch(&self) -> usize {
        (self.onset_frac * self.length as f64).floor() as usize
    }
}

/// Builds one history and returns it with its generating family as label.
pub fn generate_synthetic(spec: &SyntheticCurveSpec) -> Result<(TrainingHistory, OverfitLabel)> {
    spec.validate()?;
    let mut rng = seed::substream(spec.seed, "synthetic-noise");
    let len = spec.length as f64;
    let init = spec.initial_loss;
    let val_floor = spec.plateau * init;
    let overfit = spec.family == CurveFamily::Overfit;
    let train_floor = val_floor * if overfit { 0.4 } else { 0.9 };
    let decay = |floor: f64, rate: f64, t: f64| floor + (init - floor) * (-rate * t / len).exp();
    let onset = spec.onset_epoch() as f64;
    let floor = 1e-6 * init;

    let mut train = Vec::with_capacity(spec.length);
    let mut val = Vec::with_capacity(spec.length);
    let mut acc = Vec::with_capacity(spec.length);
    for t in 0..spec.length {
        let t = t as f64;
        let tr = decay(train_floor, 1.2 * spec.decay_rate, t);
        let va = if overfit && t > onset {
            decay(val_floor, spec.decay_rate, onset) + spec.divergence_slope * init * (t - onset) / len
        } else {
            decay(val_floor, spec.decay_rate, t)
        };
        let tr = (tr + spec.noise_sd * gaussian(&mut rng)).max(floor);
        let va = (va + spec.noise_sd * gaussian(&mut rng)).max(floor);
        train.push(tr);
        val.push(va);
        let a = (1.0 - 0.5 * va / init).clamp(0.0, 1.0);
        acc.push((a * ACCURACY_RESOLUTION).round() / ACCURACY_RESOLUTION);
    }
    let id = format!("synthetic-{:016x}", spec.seed);
    let label = spec.family.label();
    let history = TrainingHistory::new(
        id,
        LossCurve::from_values(train)?,
        LossCurve::from_values(val)?,
        Some(LossCurve::from_values(acc)?),
    )?
    .with_meta("family", label.as_str())
    .with_meta("seed", spec.seed.to_string());
    let history = if overfit {
        history.with_meta("onset_epoch", spec.onset_epoch().to_string())
    } else {
        history
    };
    Ok((history, label))
}

/// Ranges for randomly drawn synthetic specs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusConfig {
    pub n_overfit: usize,
    pub n_non_overfit: usize,
    pub length: usize,
    /// Upper bound of the per-curve noise sd, relative to the initial loss.
    pub max_noise: f64,
    pub seed: u64,
}

impl SyntheticCorpusConfig {
    pub fn balanced(n: usize, length: usize, seed: u64) -> Self {
        SyntheticCorpusConfig {
            n_overfit: n / 2,
            n_non_overfit: n - n / 2,
            length,
            max_noise: 0.02,
            seed,
        }
    }
}

/// Draws the shape parameters of curve `index` from its own seeded stream.
pub fn sample_spec(family: CurveFamily, length: usize, max_noise: f64, seed: u64) -> SyntheticCurveSpec {
    let mut rng = seed::substream(seed, "synthetic-shape");
    let initial_loss = rng.random_range(0.5..3.0);
    SyntheticCurveSpec {
        family,
        length,
        initial_loss,
        decay_rate: rng.random_range(3.0..10.0),
        plateau: rng.random_range(0.1..0.5),
        onset_frac: rng.random_range(0.25..0.75),
        divergence_slope: rng.random_range(0.3..1.5),
        noise_sd: rng.random_range(0.0..=max_noise) * initial_loss,
        seed,
    }
}

/// Labelled synthetic corpus. Families alternate while both have curves
/// left, so every prefix stays close to balanced.
pub fn synthetic_corpus(config: &SyntheticCorpusConfig) -> Result<Vec<(TrainingHistory, OverfitLabel)>> {
    let total = config.n_overfit + config.n_non_overfit;
    let (mut over_left, mut non_left) = (config.n_overfit, config.n_non_overfit);
    let mut out = Vec::with_capacity(total);
    for i in 0..total {
        let family = if (i % 2 == 0 && over_left > 0) || non_left == 0 {
            over_left -= 1;
            CurveFamily::Overfit
        } else {
            non_left -= 1;
            CurveFamily::NonOverfit
        };
        let curve_seed = seed::derive_seed(config.seed, &format!("synthetic-{i}"));
        let spec = sample_spec(family, config.length, config.max_noise, curve_seed);
        let (mut history, label) = generate_synthetic(&spec)?;
        history.id = format!("synthetic-{i:04}");
        out.push((history, label));
    }
    Ok(out)
}

/// Fixed-length validation-loss windows cut from labelled synthetic
/// histories every `step` epochs, for training rolling-window monitors.
///
/// Windows of non-overfit curves are non-overfit. A window of an overfit
/// curve is non-overfit when it ends at or before the onset epoch and
/// overfit when it ends at least `window / 2` epochs after it; windows in
/// between are skipped. Overfit histories without `onset_epoch` metadata
/// are rejected.
pub fn oracle_windows(
    corpus: &[(TrainingHistory, OverfitLabel)],
    window: usize,
    step: usize,
) -> Result<Vec<(LossCurve, OverfitLabel)>> {
    if window < 2 || step == 0 {
        return Err(Error::ConfigError(format!("window {window} / step {step} out of range")));
    }
    let mut out = Vec::new();
    for (history, label) in corpus {
        let onset = match label {
            OverfitLabel::Overfit => Some(
                history
                    .meta
                    .get("onset_epoch")
                    .and_then(|v| v.parse::<usize>().ok())
                    .ok_or_else(|| {
                        Error::InvalidInput(format!("history '{}' has no onset_epoch", history.id))
                    })?,
            ),
            OverfitLabel::NonOverfit => None,
            OverfitLabel::Uncertain => continue,
        };
        let values = history.val_loss.values();
        let mut start = 0;
        while start + window <= values.len() {
            let end = start + window;
            let window_label = match onset {
                None => Some(OverfitLabel::NonOverfit),
                Some(o) if end <= o => Some(OverfitLabel::NonOverfit),
                Some(o) if end >= o + window / 2 => Some(OverfitLabel::Overfit),
                Some(_) => None,
            };
            if let Some(l) = window_label {
                out.push((LossCurve::from_values(values[start..end].to_vec())?, l));
            }
            start += step;
        }
    }
    Ok(out)
}
