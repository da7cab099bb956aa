use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An epoch-ordered series of finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveRepr", into = "CurveRepr")]
pub struct LossCurve {
    epochs: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CurveRepr {
    epochs: Vec<usize>,
    values: Vec<f64>,
}

impl TryFrom<CurveRepr> for LossCurve {
    type Error = Error;

    fn try_from(repr: CurveRepr) -> Result<Self> {
        LossCurve::new(repr.epochs, repr.values)
    }
}

impl From<LossCurve> for CurveRepr {
    fn from(curve: LossCurve) -> Self {
        CurveRepr {
            epochs: curve.epochs,
            values: curve.values,
        }
    }
}

impl LossCurve {
    pub fn new(epochs: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if epochs.len() != values.len() {
            return Err(Error::InvalidCurve(format!(
                "{} epochs but {} values",
                epochs.len(),
                values.len()
            )));
        }
        if let Some(w) = epochs.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidCurve(format!(
                "epochs not strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidCurve(format!(
                "non-finite value at epoch {}",
                epochs[i]
            )));
        }
        Ok(LossCurve { epochs, values })
    }

    /// Curve over epochs `0..values.len()`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let epochs = (0..values.len()).collect();
        LossCurve::new(epochs, values)
    }

    pub fn epochs(&self) -> &[usize] {
        &self.epochs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the smallest value, earliest on ties.
    pub fn argmin(&self) -> Option<usize> {
        argmin(&self.values)
    }

    pub(crate) fn require_len(&self, min: usize) -> Result<()> {
        if self.len() < min {
            Err(Error::InvalidCurve(format!(
                "need at least {min} points, got {}",
                self.len()
            )))
        } else {
            Ok(())
        }
    }
}

/// Index of the smallest value, earliest on ties.
pub fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] <= v => {}
            _ => best = Some(i),
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverfitLabel {
    Overfit,
    NonOverfit,
    Uncertain,
}

impl OverfitLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            OverfitLabel::Overfit => "overfit",
            OverfitLabel::NonOverfit => "non_overfit",
            OverfitLabel::Uncertain => "uncertain",
        }
    }

    pub fn is_overfit(self) -> bool {
        self == OverfitLabel::Overfit
    }
}

impl fmt::Display for OverfitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OverfitLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "overfit" => Ok(OverfitLabel::Overfit),
            "non_overfit" => Ok(OverfitLabel::NonOverfit),
            "uncertain" => Ok(OverfitLabel::Uncertain),
            other => Err(Error::InvalidInput(format!("unknown label '{other}'"))),
        }
    }
}

/// Which per-epoch quantity a monitor or detector watches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSource {
    #[default]
    ValLoss,
    /// `1 - val_accuracy`
    ZeroOneLoss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitoredSeries {
    pub source: MetricSource,
    pub curve: LossCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub id: String,
    pub train_loss: LossCurve,
    pub val_loss: LossCurve,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_accuracy: Option<LossCurve>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl TrainingHistory {
    pub fn new(
        id: impl Into<String>,
        train_loss: LossCurve,
        val_loss: LossCurve,
        val_accuracy: Option<LossCurve>,
    ) -> Result<Self> {
        if train_loss.epochs() != val_loss.epochs() {
            return Err(Error::InvalidCurve(
                "train and validation losses cover different epochs".into(),
            ));
        }
        if let Some(acc) = &val_accuracy {
            if acc.epochs() != val_loss.epochs() {
                return Err(Error::InvalidCurve(
                    "validation accuracy covers different epochs than validation loss".into(),
                ));
            }
            if acc.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidCurve(
                    "validation accuracy outside [0, 1]".into(),
                ));
            }
        }
        Ok(TrainingHistory {
            id: id.into(),
            train_loss,
            val_loss,
            val_accuracy,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    pub fn len(&self) -> usize {
        self.val_loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.val_loss.is_empty()
    }

    pub fn epochs(&self) -> &[usize] {
        self.val_loss.epochs()
    }

    pub fn monitored(&self, source: MetricSource) -> Result<MonitoredSeries> {
        let curve = match source {
            MetricSource::ValLoss => self.val_loss.clone(),
            MetricSource::ZeroOneLoss => {
                let acc = self.val_accuracy.as_ref().ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "history '{}' has no validation accuracy for zero-one loss",
                        self.id
                    ))
                })?;
                let values = acc.values().iter().map(|a| 1.0 - a).collect();
                LossCurve::new(acc.epochs().to_vec(), values)?
            }
        };
        Ok(MonitoredSeries { source, curve })
    }
}
