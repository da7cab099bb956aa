//! Online stopping strategies fed one monitored value per epoch.

mod protocol;
mod session;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::MetricSource;

pub use protocol::{parse_record, render_decision, run_monitor, Inbound, MonitorExit};
pub use session::{open_session, replay, MonitorSession, ReplayOutcome};

pub const DEFAULT_SMOOTHING_WINDOW: usize = 10;
pub const DEFAULT_STEP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    EarlyStop,
    EarlyStopSmoothed,
    RollingWindow,
    WholeHistory,
}

impl Strategy {
    pub fn uses_classifier(self) -> bool {
        matches!(self, Strategy::RollingWindow | Strategy::WholeHistory)
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::EarlyStop => "early_stop",
            Strategy::EarlyStopSmoothed => "early_stop_smoothed",
            Strategy::RollingWindow => "rolling_window",
            Strategy::WholeHistory => "whole_history",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreventionConfig {
    pub strategy: Strategy,
    /// Non-improving epochs tolerated by the early-stopping strategies.
    pub patience: usize,
    /// Trailing moving-average width for smoothed early stopping.
    pub smoothing_window: usize,
    /// Rolling-window width in epochs.
    pub window: usize,
    /// Epochs between classifier checks.
    pub step: usize,
    pub min_delta: f64,
    pub metric: MetricSource,
}

impl Default for PreventionConfig {
    fn default() -> Self {
        PreventionConfig {
            strategy: Strategy::EarlyStop,
            patience: 20,
            smoothing_window: DEFAULT_SMOOTHING_WINDOW,
            window: 40,
            step: DEFAULT_STEP,
            min_delta: 0.0,
            metric: MetricSource::ValLoss,
        }
    }
}

impl PreventionConfig {
    pub fn early_stop(patience: usize) -> Self {
        PreventionConfig {
            strategy: Strategy::EarlyStop,
            patience,
            ..Default::default()
        }
    }

    pub fn smoothed(patience: usize, smoothing_window: usize) -> Self {
        PreventionConfig {
            strategy: Strategy::EarlyStopSmoothed,
            patience,
            smoothing_window,
            ..Default::default()
        }
    }

    pub fn rolling(window: usize, step: usize) -> Self {
        PreventionConfig {
            strategy: Strategy::RollingWindow,
            window,
            step,
            ..Default::default()
        }
    }

    pub fn whole_history(step: usize) -> Self {
        PreventionConfig {
            strategy: Strategy::WholeHistory,
            step,
            ..Default::default()
        }
    }

    pub fn with_metric(mut self, metric: MetricSource) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_min_delta(mut self, min_delta: f64) -> Self {
        self.min_delta = min_delta;
        self
    }

    /// Short label such as `early_stop(p=40)` or `rolling_window(w=40,s=10)`.
    pub fn label(&self) -> String {
        match self.strategy {
            Strategy::EarlyStop => format!("early_stop(p={})", self.patience),
            Strategy::EarlyStopSmoothed => {
                format!("early_stop_smoothed(p={},ma={})", self.patience, self.smoothing_window)
            }
            Strategy::RollingWindow => format!("rolling_window(w={},s={})", self.window, self.step),
            Strategy::WholeHistory => format!("whole_history(s={})", self.step),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::ConfigError(m));
        if !(self.min_delta >= 0.0 && self.min_delta.is_finite()) {
            return err(format!("min_delta must be finite and non-negative, got {}", self.min_delta));
        }
        match self.strategy {
            Strategy::EarlyStop | Strategy::EarlyStopSmoothed => {
                if self.patience == 0 {
                    return err("patience must be at least 1".into());
                }
                if self.strategy == Strategy::EarlyStopSmoothed && self.smoothing_window == 0 {
                    return err("smoothing window must be at least 1".into());
                }
            }
            Strategy::RollingWindow => {
                if self.window < 2 {
                    return err(format!("window must be at least 2, got {}", self.window));
                }
                if self.step == 0 || self.step > self.window {
                    return err(format!(
                        "step must lie in [1, window = {}], got {}",
                        self.window, self.step
                    ));
                }
            }
            Strategy::WholeHistory => {
                if self.step == 0 {
                    return err("step must be at least 1".into());
                }
            }
        }
        Ok(())
    }
}

/// Where a run stopped and which earlier epoch it reports as best.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopPoint {
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    /// Lowest monitored value over epochs up to `stopped_epoch`.
    pub best_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum StopDecision {
    Continue,
    Stop(StopPoint),
}

impl StopDecision {
    pub fn is_stop(&self) -> bool {
        matches!(self, StopDecision::Stop(_))
    }
}
