//! Post-hoc overfitting detection on completed training histories.

mod correlation;
mod heuristic;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::ClassifierModel;
use crate::error::Result;
use crate::history::{OverfitLabel, TrainingHistory};
use crate::model_file;

pub use correlation::{
    average_ranks, calibrate_threshold, correlation, correlation_of, pearson, spearman,
    threshold_grid, Calibration, CorrelationKind, ThresholdModel, DEFAULT_LAG,
};
pub use heuristic::{
    heuristic_grid_search, heuristic_label, HeuristicModel, HeuristicSearch, HeuristicThresholds,
    TailDirection,
};

/// Any model that can label a finished history.
#[derive(Debug, Clone, PartialEq)]
pub enum Detector {
    Threshold(ThresholdModel),
    Classifier(ClassifierModel),
    Heuristic(HeuristicModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: OverfitLabel,
    pub score: f64,
}

impl Detector {
    /// The `kind` field used in model files.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Detector::Threshold(_) => "threshold",
            Detector::Classifier(m) => m.kind().name(),
            Detector::Heuristic(_) => "heuristic",
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        model_file::save(self, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        model_file::load(path)
    }
}

/// Labels a history. Classifiers only look at the validation loss.
pub fn detect(model: &Detector, history: &TrainingHistory) -> Result<Detection> {
    match model {
        Detector::Threshold(t) => {
            let r = correlation::defined(correlation(t.correlation, history))?;
            let (label, score) = t.decide(r);
            Ok(Detection { label, score })
        }
        Detector::Classifier(m) => {
            let p = m.predict(&history.val_loss)?;
            Ok(Detection {
                label: p.label,
                score: p.score,
            })
        }
        Detector::Heuristic(h) => {
            let label = heuristic_label(history, h)?;
            let score = if label.is_overfit() { 1.0 } else { 0.0 };
            Ok(Detection { label, score })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{fit, CanonicalLen, ClassifierParams, ClassifierSpec, KnnDtwParams, Normalization};
    use crate::dtw::DtwParams;
    use crate::history::LossCurve;

    fn history(train: &[f64], val: &[f64]) -> TrainingHistory {
        TrainingHistory::new(
            "h",
            LossCurve::from_values(train.to_vec()).unwrap(),
            LossCurve::from_values(val.to_vec()).unwrap(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn spearman_threshold_detection() {
        let m = Detector::Threshold(ThresholdModel::new(CorrelationKind::Spearman, 0.5).unwrap());
        let co = history(&[3.0, 2.0, 1.0], &[6.0, 4.0, 2.0]);
        assert_eq!(detect(&m, &co).unwrap().label, OverfitLabel::NonOverfit);
        let diverging = history(&[3.0, 2.0, 1.0], &[1.0, 2.0, 3.0]);
        assert_eq!(detect(&m, &diverging).unwrap().label, OverfitLabel::Overfit);
    }

    #[test]
    fn classifier_detection_uses_validation_curve() {
        let spec = ClassifierSpec::new(ClassifierParams::KnnDtw(KnnDtwParams {
            k: 1,
            dtw: DtwParams::exact(),
        }))
        .with_canonical_len(CanonicalLen::Variable)
        .with_normalization(Normalization::None);
        let data = vec![
            (LossCurve::from_values(vec![3.0, 2.0, 1.0]).unwrap(), OverfitLabel::NonOverfit),
            (LossCurve::from_values(vec![3.0, 1.0, 3.0]).unwrap(), OverfitLabel::Overfit),
        ];
        let m = Detector::Classifier(fit(&spec, &data).unwrap());
        // the training curve alone would match the non-overfit example
        let h = history(&[3.0, 2.0, 1.0], &[3.0, 1.5, 2.8]);
        let d = detect(&m, &h).unwrap();
        assert_eq!((d.label, d.score), (OverfitLabel::Overfit, 1.0));
    }
}
