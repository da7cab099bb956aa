use serde::{Deserialize, Serialize};

use crate::dtw::{self, DtwParams};
use crate::error::{Error, Result};
use crate::history::OverfitLabel;

use super::Prediction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnDtwParams {
    /// Odd number of neighbours.
    pub k: usize,
    pub dtw: DtwParams,
}

impl Default for KnnDtwParams {
    fn default() -> Self {
        KnnDtwParams {
            k: 1,
            dtw: DtwParams::default(),
        }
    }
}

impl KnnDtwParams {
    pub(super) fn validate(&self, n_train: usize) -> Result<()> {
        if self.k == 0 || self.k.is_multiple_of(2) {
            return Err(Error::ConfigError(format!(
                "k must be a positive odd number, got {}",
                self.k
            )));
        }
        if self.k > n_train {
            return Err(Error::ConfigError(format!(
                "k = {} exceeds the {n_train} training curves",
                self.k
            )));
        }
        Ok(())
    }
}

/// Lazily fitted state: the preprocessed training curves and their labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnState {
    pub curves: Vec<Vec<f64>>,
    pub labels: Vec<OverfitLabel>,
}

impl KnnState {
    pub(super) fn fit(curves: Vec<Vec<f64>>, labels: Vec<OverfitLabel>) -> Self {
        KnnState { curves, labels }
    }

    pub(super) fn predict(&self, params: &KnnDtwParams, x: &[f64]) -> Result<Prediction> {
        let neighbours = self
            .curves
            .iter()
            .zip(&self.labels)
            .map(|(c, l)| Ok((dtw::distance(x, c, &params.dtw)?, *l)))
            .collect::<Result<Vec<_>>>()?;
        Ok(vote(neighbours, params.k))
    }
}

/// Majority vote of the `k` nearest neighbours. Distance ties keep training
/// order, so the result is deterministic.
pub(super) fn vote(mut neighbours: Vec<(f64, OverfitLabel)>, k: usize) -> Prediction {
    // stable sort keeps training order among equal distances
    neighbours.sort_by(|a, b| a.0.total_cmp(&b.0));
    let k = k.min(neighbours.len()).max(1);
    let overfit = neighbours[..k].iter().filter(|(_, l)| l.is_overfit()).count();
    let score = overfit as f64 / k as f64;
    let label = if 2 * overfit > k {
        OverfitLabel::Overfit
    } else {
        OverfitLabel::NonOverfit
    };
    Prediction { label, score }
}
