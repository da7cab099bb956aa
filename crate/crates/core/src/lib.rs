//! Overfitting detection and prevention from learning curves.
//!
//! The crate classifies validation-loss curves with time-series classifiers
//! (KNN-DTW, time series forest, SAX-VSM) and compares them against
//! correlation baselines, a rule-based labeller and early stopping.

pub mod classifiers;
pub mod detectors;
pub mod dtw;
pub mod error;
pub mod evaluation;
pub mod history;
pub mod model_file;
pub mod prevention;
pub mod seed;
pub mod simulation;

pub use error::{Error, Result};
pub use history::{LossCurve, MetricSource, OverfitLabel, TrainingHistory};
