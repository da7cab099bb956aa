//! Trainable time-series classifiers over loss curves.
//!
//! Every classifier sees a curve after the same preprocessing: resampling to
//! the model's canonical length (unless the model accepts variable lengths)
//! followed by the model's normalization policy.

mod cv;
mod knn;
mod sax;
mod tsf;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{resample_values, z_normalize_values, LossCurve, OverfitLabel};
use crate::detectors::Detector;
use crate::model_file;

pub use cv::{grid_search_cv, stratified_folds, CandidateScore, CvReport, N_FOLDS};
pub use knn::{KnnDtwParams, KnnState};
pub use sax::{breakpoints, SaxVsmParams, SaxVsmState};
pub use tsf::{Interval, Node, Tree, TsfParams, TsfState};

pub const DEFAULT_CANONICAL_LEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    KnnDtw,
    Tsf,
    SaxVsm,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::KnnDtw => "knn_dtw",
            ClassifierKind::Tsf => "tsf",
            ClassifierKind::SaxVsm => "sax_vsm",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    #[default]
    ZNorm,
}

/// Length every curve is resampled to before classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CanonicalLen {
    Fixed(usize),
    /// Curves keep their own length (KNN-DTW only).
    Variable,
}

impl Default for CanonicalLen {
    fn default() -> Self {
        CanonicalLen::Fixed(DEFAULT_CANONICAL_LEN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierParams {
    KnnDtw(KnnDtwParams),
    Tsf(TsfParams),
    SaxVsm(SaxVsmParams),
}

impl ClassifierParams {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierParams::KnnDtw(_) => ClassifierKind::KnnDtw,
            ClassifierParams::Tsf(_) => ClassifierKind::Tsf,
            ClassifierParams::SaxVsm(_) => ClassifierKind::SaxVsm,
        }
    }
}

/// One trainable configuration: parameters plus preprocessing policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub params: ClassifierParams,
    #[serde(default)]
    pub canonical_len: CanonicalLen,
    #[serde(default)]
    pub normalization: Normalization,
}

impl ClassifierSpec {
    pub fn new(params: ClassifierParams) -> Self {
        ClassifierSpec {
            params,
            canonical_len: CanonicalLen::default(),
            normalization: Normalization::default(),
        }
    }

    pub fn with_canonical_len(mut self, len: CanonicalLen) -> Self {
        self.canonical_len = len;
        self
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn kind(&self) -> ClassifierKind {
        self.params.kind()
    }

    fn preprocessor(&self) -> Preprocessor {
        Preprocessor {
            canonical_len: self.canonical_len,
            normalization: self.normalization,
        }
    }

    fn validate(&self, n_train: usize) -> Result<()> {
        let fixed = match self.canonical_len {
            CanonicalLen::Fixed(len) if len < 2 => {
                return Err(Error::ConfigError(format!(
                    "canonical length must be at least 2, got {len}"
                )))
            }
            CanonicalLen::Fixed(len) => Some(len),
            CanonicalLen::Variable => None,
        };
        match &self.params {
            ClassifierParams::KnnDtw(p) => p.validate(n_train),
            ClassifierParams::Tsf(p) => p.validate(fixed.ok_or_else(|| {
                Error::ConfigError("time series forest needs a fixed canonical length".into())
            })?),
            ClassifierParams::SaxVsm(p) => p.validate(fixed.ok_or_else(|| {
                Error::ConfigError("SAX-VSM needs a fixed canonical length".into())
            })?),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Preprocessor {
    canonical_len: CanonicalLen,
    normalization: Normalization,
}

impl Preprocessor {
    fn apply(&self, curve: &LossCurve) -> Result<Vec<f64>> {
        curve.require_len(2)?;
        let values = match self.canonical_len {
            CanonicalLen::Fixed(len) => resample_values(curve.values(), len),
            CanonicalLen::Variable => curve.values().to_vec(),
        };
        Ok(match self.normalization {
            Normalization::None => values,
            Normalization::ZNorm => z_normalize_values(&values),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) enum TrainedState {
    KnnDtw { params: KnnDtwParams, state: KnnState },
    Tsf { params: TsfParams, state: TsfState },
    SaxVsm { params: SaxVsmParams, state: SaxVsmState },
}

/// A fitted classifier. Immutable; `predict` is a pure function of the model
/// and the query curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub(crate) canonical_len: CanonicalLen,
    pub(crate) normalization: Normalization,
    pub(crate) trained: TrainedState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: OverfitLabel,
    /// Support for the overfit class in [0, 1].
    pub score: f64,
}

impl ClassifierModel {
    pub fn kind(&self) -> ClassifierKind {
        match self.trained {
            TrainedState::KnnDtw { .. } => ClassifierKind::KnnDtw,
            TrainedState::Tsf { .. } => ClassifierKind::Tsf,
            TrainedState::SaxVsm { .. } => ClassifierKind::SaxVsm,
        }
    }

    pub fn canonical_len(&self) -> CanonicalLen {
        self.canonical_len
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn params(&self) -> ClassifierParams {
        match &self.trained {
            TrainedState::KnnDtw { params, .. } => ClassifierParams::KnnDtw(*params),
            TrainedState::Tsf { params, .. } => ClassifierParams::Tsf(*params),
            TrainedState::SaxVsm { params, .. } => ClassifierParams::SaxVsm(*params),
        }
    }

    fn preprocessor(&self) -> Preprocessor {
        Preprocessor {
            canonical_len: self.canonical_len,
            normalization: self.normalization,
        }
    }

    /// Classifies a curve of any length ≥ 2; fixed-length models resample it.
    pub fn predict(&self, curve: &LossCurve) -> Result<Prediction> {
        let x = self.preprocessor().apply(curve)?;
        self.predict_prepared(&x)
    }

    fn predict_prepared(&self, x: &[f64]) -> Result<Prediction> {
        match &self.trained {
            TrainedState::KnnDtw { params, state } => state.predict(params, x),
            TrainedState::Tsf { state, .. } => Ok(state.predict(x)),
            TrainedState::SaxVsm { params, state } => Ok(state.predict(params, x)),
        }
    }
}

fn check_training_labels(data: &[(LossCurve, OverfitLabel)]) -> Result<()> {
    if data.iter().any(|(_, l)| *l == OverfitLabel::Uncertain) {
        return Err(Error::InvalidInput(
            "uncertain histories cannot be used for training".into(),
        ));
    }
    let overfit = data.iter().filter(|(_, l)| l.is_overfit()).count();
    if overfit == 0 || overfit == data.len() {
        return Err(Error::DegenerateTraining);
    }
    Ok(())
}

/// Trains a classifier on labelled curves.
pub fn fit(spec: &ClassifierSpec, data: &[(LossCurve, OverfitLabel)]) -> Result<ClassifierModel> {
    check_training_labels(data)?;
    spec.validate(data.len())?;
    let pre = spec.preprocessor();
    let xs = data
        .iter()
        .map(|(c, _)| pre.apply(c))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<OverfitLabel> = data.iter().map(|(_, l)| *l).collect();
    fit_prepared(spec, xs, labels)
}

fn fit_prepared(
    spec: &ClassifierSpec,
    xs: Vec<Vec<f64>>,
    labels: Vec<OverfitLabel>,
) -> Result<ClassifierModel> {
    let trained = match &spec.params {
        ClassifierParams::KnnDtw(p) => TrainedState::KnnDtw {
            params: *p,
            state: KnnState::fit(xs, labels),
        },
        ClassifierParams::Tsf(p) => TrainedState::Tsf {
            params: *p,
            state: TsfState::fit(p, &xs, &labels),
        },
        ClassifierParams::SaxVsm(p) => TrainedState::SaxVsm {
            params: *p,
            state: SaxVsmState::fit(p, &xs, &labels),
        },
    };
    Ok(ClassifierModel {
        canonical_len: spec.canonical_len,
        normalization: spec.normalization,
        trained,
    })
}

pub fn save_model(model: &ClassifierModel, path: impl AsRef<Path>) -> Result<()> {
    model_file::save(&Detector::Classifier(model.clone()), path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ClassifierModel> {
    match model_file::load(path)? {
        Detector::Classifier(model) => Ok(model),
        other => Err(Error::ModelFormatError(format!(
            "expected a classifier model, found '{}'",
            other.kind_name()
        ))),
    }
}

/// The default hyperparameter grid for `kind` at a given canonical length.
pub fn default_grid(kind: ClassifierKind, canonical_len: usize, seed: u64) -> Vec<ClassifierSpec> {
    let fixed = CanonicalLen::Fixed(canonical_len);
    let mut grid = Vec::new();
    match kind {
        ClassifierKind::KnnDtw => {
            for k in [1, 3, 5] {
                for radius in [5, 10, 20] {
                    grid.push(ClassifierParams::KnnDtw(KnnDtwParams {
                        k,
                        dtw: crate::dtw::DtwParams::fast(radius),
                    }));
                }
            }
        }
        ClassifierKind::Tsf => {
            for n_trees in [100, 300] {
                for min_interval in [3, 8] {
                    grid.push(ClassifierParams::Tsf(TsfParams {
                        n_trees,
                        min_interval,
                        max_depth: None,
                        rng_seed: crate::seed::derive_seed(seed, "tsf"),
                    }));
                }
            }
        }
        ClassifierKind::SaxVsm => {
            for word_size in [4, 8] {
                for alphabet_size in [3, 4, 6] {
                    for window_len in [canonical_len / 4, canonical_len / 2] {
                        if window_len >= word_size {
                            grid.push(ClassifierParams::SaxVsm(SaxVsmParams {
                                word_size,
                                alphabet_size,
                                window_len,
                            }));
                        }
                    }
                }
            }
        }
    }
    grid.into_iter()
        .map(|p| ClassifierSpec::new(p).with_canonical_len(fixed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtw::DtwParams;

    fn curve(values: &[f64]) -> LossCurve {
        LossCurve::from_values(values.to_vec()).unwrap()
    }

    fn knn1_raw() -> ClassifierSpec {
        ClassifierSpec::new(ClassifierParams::KnnDtw(KnnDtwParams {
            k: 1,
            dtw: DtwParams::exact(),
        }))
        .with_canonical_len(CanonicalLen::Variable)
        .with_normalization(Normalization::None)
    }

    #[test]
    fn knn_hand_example() {
        let data = vec![
            (curve(&[3.0, 2.0, 1.0]), OverfitLabel::NonOverfit),
            (curve(&[3.0, 1.0, 3.0]), OverfitLabel::Overfit),
        ];
        let model = fit(&knn1_raw(), &data).unwrap();
        let p = model.predict(&curve(&[3.0, 1.5, 2.8])).unwrap();
        assert_eq!(p.label, OverfitLabel::Overfit);
        assert_eq!(p.score, 1.0);
    }

    #[test]
    fn knn_query_on_training_curve() {
        let c = curve(&[1.0, 0.5, 0.4, 0.6, 0.9]);
        let d = curve(&[1.0, 0.6, 0.4, 0.3, 0.25]);
        let data = vec![
            (c.clone(), OverfitLabel::Overfit),
            (d, OverfitLabel::NonOverfit),
        ];
        let model = fit(&knn1_raw(), &data).unwrap();
        let p = model.predict(&c).unwrap();
        assert_eq!((p.label, p.score), (OverfitLabel::Overfit, 1.0));
    }

    #[test]
    fn fit_rejects_bad_training_sets() {
        let one_class = vec![
            (curve(&[1.0, 2.0]), OverfitLabel::Overfit),
            (curve(&[2.0, 1.0]), OverfitLabel::Overfit),
        ];
        assert!(matches!(
            fit(&knn1_raw(), &one_class),
            Err(Error::DegenerateTraining)
        ));
        let uncertain = vec![
            (curve(&[1.0, 2.0]), OverfitLabel::Overfit),
            (curve(&[2.0, 1.0]), OverfitLabel::Uncertain),
            (curve(&[2.0, 1.0]), OverfitLabel::NonOverfit),
        ];
        assert!(matches!(
            fit(&knn1_raw(), &uncertain),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn fixed_length_models_refuse_variable_length() {
        let spec = ClassifierSpec::new(ClassifierParams::Tsf(TsfParams::default()))
            .with_canonical_len(CanonicalLen::Variable);
        let data = vec![
            (curve(&[1.0, 2.0, 3.0]), OverfitLabel::Overfit),
            (curve(&[3.0, 2.0, 1.0]), OverfitLabel::NonOverfit),
        ];
        assert!(matches!(fit(&spec, &data), Err(Error::ConfigError(_))));
    }

    #[test]
    fn default_grids_match_documented_sizes() {
        assert_eq!(default_grid(ClassifierKind::KnnDtw, 100, 0).len(), 9);
        assert_eq!(default_grid(ClassifierKind::Tsf, 100, 0).len(), 4);
        assert_eq!(default_grid(ClassifierKind::SaxVsm, 100, 0).len(), 12);
    }
}
