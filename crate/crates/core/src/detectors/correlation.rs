use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::ConfusionCounts;
use crate::history::{OverfitLabel, TrainingHistory};

pub const DEFAULT_LAG: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CorrelationKind {
    Spearman,
    Pearson,
    /// Pairs `train[t - lag]` with `val[t]`.
    LaggedPearson { lag: usize },
}

impl CorrelationKind {
    pub fn lagged() -> Self {
        CorrelationKind::LaggedPearson { lag: DEFAULT_LAG }
    }

    pub fn name(&self) -> String {
        match self {
            CorrelationKind::Spearman => "spearman".into(),
            CorrelationKind::Pearson => "pearson".into(),
            CorrelationKind::LaggedPearson { lag } => format!("lagged_pearson({lag})"),
        }
    }

    fn min_len(&self) -> usize {
        match self {
            CorrelationKind::LaggedPearson { lag } => lag + 3,
            _ => 3,
        }
    }
}

fn is_constant(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] == w[1])
}

/// Product-moment correlation; constant input has no defined correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "correlated series differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if is_constant(x) || is_constant(y) {
        return Err(Error::UndefinedCorrelation);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if is_constant(x) || is_constant(y) {
        return Err(Error::UndefinedCorrelation);
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Correlation between two aligned series under `kind`.
pub fn correlation_of(kind: CorrelationKind, train: &[f64], val: &[f64]) -> Result<f64> {
    if train.len() != val.len() {
        return Err(Error::InvalidInput("train and validation lengths differ".into()));
    }
    if train.len() < kind.min_len() {
        return Err(Error::InvalidInput(format!(
            "{} needs at least {} epochs, got {}",
            kind.name(),
            kind.min_len(),
            train.len()
        )));
    }
    match kind {
        CorrelationKind::Spearman => spearman(train, val),
        CorrelationKind::Pearson => pearson(train, val),
        CorrelationKind::LaggedPearson { lag } => {
            if lag == 0 {
                return Err(Error::ConfigError("lag must be positive".into()));
            }
            let n = train.len();
            pearson(&train[..n - lag], &val[lag..])
        }
    }
}

/// Correlation between the training and validation loss of a history.
pub fn correlation(kind: CorrelationKind, history: &TrainingHistory) -> Result<f64> {
    correlation_of(kind, history.train_loss.values(), history.val_loss.values())
}

/// Correlation-threshold detector: a correlation below the threshold means
/// the curves have decoupled, which is read as overfitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    pub correlation: CorrelationKind,
    pub threshold: f64,
}

impl ThresholdModel {
    pub fn new(correlation: CorrelationKind, threshold: f64) -> Result<Self> {
        let m = ThresholdModel {
            correlation,
            threshold,
        };
        m.validate()?;
        Ok(m)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.threshold) {
            return Err(Error::ConfigError(format!(
                "threshold {} lies outside [-1, 1]",
                self.threshold
            )));
        }
        if self.correlation == (CorrelationKind::LaggedPearson { lag: 0 }) {
            return Err(Error::ConfigError("lag must be positive".into()));
        }
        Ok(())
    }

    /// Label and margin for an already computed correlation. An undefined
    /// correlation reads as no divergence.
    pub fn decide(&self, corr: Option<f64>) -> (OverfitLabel, f64) {
        match corr {
            None => (OverfitLabel::NonOverfit, 0.0),
            Some(r) => {
                let label = if r < self.threshold {
                    OverfitLabel::Overfit
                } else {
                    OverfitLabel::NonOverfit
                };
                (label, ((r - self.threshold).abs() / 2.0).clamp(0.0, 1.0))
            }
        }
    }
}

/// Maps UndefinedCorrelation to `None`, passing other errors through.
pub(crate) fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedCorrelation) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub model: ThresholdModel,
    pub macro_f: f64,
}

/// Candidate thresholds: -1.00, -0.99, ..., 1.00.
pub fn threshold_grid() -> impl Iterator<Item = f64> {
    (-100..=100).map(|i| f64::from(i) / 100.0)
}

/// Scans the threshold grid for the best macro F on labelled histories.
/// Ties go to the smallest threshold. Uncertain histories are ignored.
pub fn calibrate_threshold(
    kind: CorrelationKind,
    labelled: &[(TrainingHistory, OverfitLabel)],
) -> Result<Calibration> {
    let mut points = Vec::with_capacity(labelled.len());
    for (h, label) in labelled {
        if *label == OverfitLabel::Uncertain {
            continue;
        }
        points.push((defined(correlation(kind, h))?, *label));
    }
    let overfit = points.iter().filter(|(_, l)| l.is_overfit()).count();
    if overfit == 0 || overfit == points.len() {
        return Err(Error::DegenerateCalibration);
    }
    let mut best: Option<Calibration> = None;
    for threshold in threshold_grid() {
        let model = ThresholdModel {
            correlation: kind,
            threshold,
        };
        let counts =
            ConfusionCounts::from_pairs(points.iter().map(|&(r, truth)| (truth, model.decide(r).0)));
        let macro_f = counts.macro_f();
        if best.is_none_or(|b| macro_f > b.macro_f) {
            best = Some(Calibration { model, macro_f });
        }
    }
    Ok(best.expect("threshold grid is non-empty"))
}
