use serde::{Deserialize, Serialize};

use crate::classifiers::ClassifierModel;
use crate::error::{Error, Result};
use crate::history::{argmin, trailing_mean, LossCurve, OverfitLabel, TrainingHistory};

use super::{PreventionConfig, StopDecision, StopPoint, Strategy};

/// Mutable state of one monitored run. Owned by a single caller.
#[derive(Debug, Clone)]
pub struct MonitorSession {
    config: PreventionConfig,
    model: Option<ClassifierModel>,
    epochs: Vec<usize>,
    values: Vec<f64>,
    /// Index of the earliest raw minimum.
    best: Option<usize>,
    /// Reference value of the early-stopping wait counter (raw or smoothed).
    reference: f64,
    wait: usize,
    last_check: Option<usize>,
    stopped: Option<StopPoint>,
}

/// Starts a session. Classifier strategies need a model; early stopping
/// must not be given one.
pub fn open_session(config: PreventionConfig, model: Option<ClassifierModel>) -> Result<MonitorSession> {
    config.validate()?;
    match (config.strategy.uses_classifier(), model.is_some()) {
        (true, false) => {
            return Err(Error::ConfigError(format!(
                "strategy {} needs a classifier model",
                config.strategy.name()
            )))
        }
        (false, true) => {
            return Err(Error::ConfigError(format!(
                "strategy {} does not take a classifier model",
                config.strategy.name()
            )))
        }
        _ => {}
    }
    Ok(MonitorSession {
        config,
        model,
        epochs: Vec::new(),
        values: Vec::new(),
        best: None,
        reference: f64::INFINITY,
        wait: 0,
        last_check: None,
        stopped: None,
    })
}

impl MonitorSession {
    pub fn config(&self) -> &PreventionConfig {
        &self.config
    }

    pub fn observed(&self) -> usize {
        self.values.len()
    }

    /// Epoch of the most recent classifier check, if any.
    pub fn last_check(&self) -> Option<usize> {
        self.last_check
    }

    pub fn stopped(&self) -> Option<StopPoint> {
        self.stopped
    }

    /// Best epoch and value observed so far.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.best.map(|i| (self.epochs[i], self.values[i]))
    }

    fn stop_here(&mut self) -> StopPoint {
        let (best_epoch, best_value) = self.best().expect("at least one observation");
        let point = StopPoint {
            stopped_epoch: *self.epochs.last().expect("at least one observation"),
            best_epoch,
            best_value,
        };
        self.stopped = Some(point);
        point
    }

    /// Feeds one epoch. Once stopped, further calls repeat the stop decision.
    pub fn observe(&mut self, epoch: usize, value: f64) -> Result<StopDecision> {
        if let Some(point) = self.stopped {
            return Ok(StopDecision::Stop(point));
        }
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!("epoch {epoch}: monitored value is not finite")));
        }
        if let Some(&last) = self.epochs.last() {
            if epoch <= last {
                return Err(Error::OutOfOrderEpoch { epoch, last });
            }
        }
        self.epochs.push(epoch);
        self.values.push(value);
        let i = self.values.len() - 1;
        if self.best.is_none_or(|b| value < self.values[b]) {
            self.best = Some(i);
        }

        let stop = match self.config.strategy {
            Strategy::EarlyStop => self.patience_exhausted(value),
            Strategy::EarlyStopSmoothed => {
                let smoothed = trailing_mean(&self.values, self.config.smoothing_window);
                self.patience_exhausted(smoothed)
            }
            Strategy::RollingWindow => {
                let n = self.values.len();
                let due = n >= self.config.window && (n - self.config.window).is_multiple_of(self.config.step);
                due && self.classify_overfit(n - self.config.window)?
            }
            Strategy::WholeHistory => {
                let n = self.values.len();
                let due = n >= 2 && n.is_multiple_of(self.config.step);
                due && self.classify_overfit(0)?
            }
        };
        Ok(if stop {
            StopDecision::Stop(self.stop_here())
        } else {
            StopDecision::Continue
        })
    }

    fn patience_exhausted(&mut self, value: f64) -> bool {
        if value < self.reference - self.config.min_delta {
            self.reference = value;
            self.wait = 0;
        } else {
            self.wait += 1;
        }
        self.wait >= self.config.patience
    }

    fn classify_overfit(&mut self, from: usize) -> Result<bool> {
        let model = self.model.as_ref().expect("classifier strategies carry a model");
        let curve = LossCurve::new(self.epochs[from..].to_vec(), self.values[from..].to_vec())?;
        self.last_check = self.epochs.last().copied();
        Ok(model.predict(&curve)?.label == OverfitLabel::Overfit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    /// The stop point; the last epoch when the strategy never triggered.
    pub stop: StopPoint,
    pub triggered: bool,
    pub delay: usize,
    /// Earliest epoch of the global minimum of the monitored curve.
    pub optimal_epoch: usize,
    pub hit_optimal: bool,
    pub accuracy_at_best: Option<f64>,
}

/// Feeds a finished history through a fresh session, epoch by epoch.
pub fn replay(
    config: &PreventionConfig,
    model: Option<&ClassifierModel>,
    history: &TrainingHistory,
) -> Result<ReplayOutcome> {
    let series = history.monitored(config.metric)?.curve;
    if series.is_empty() {
        return Err(Error::InvalidCurve(format!("history '{}' is empty", history.id)));
    }
    let mut session = open_session(*config, model.cloned())?;
    let mut triggered = false;
    for (&epoch, &value) in series.epochs().iter().zip(series.values()) {
        if session.observe(epoch, value)?.is_stop() {
            triggered = true;
            break;
        }
    }
    let stop = match session.stopped() {
        Some(p) => p,
        None => session.stop_here(),
    };
    let optimal = argmin(series.values()).expect("non-empty series");
    let optimal_epoch = series.epochs()[optimal];
    let accuracy_at_best = history.val_accuracy.as_ref().map(|acc| {
        let idx = acc
            .epochs()
            .binary_search(&stop.best_epoch)
            .expect("accuracy shares the monitored epochs");
        acc.values()[idx]
    });
    Ok(ReplayOutcome {
        stop,
        triggered,
        delay: stop.stopped_epoch - stop.best_epoch,
        optimal_epoch,
        hit_optimal: stop.best_epoch == optimal_epoch,
        accuracy_at_best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{fit, CanonicalLen, ClassifierParams, ClassifierSpec, KnnDtwParams};
    use crate::dtw::DtwParams;
    use crate::history::MetricSource;
    use proptest::prelude::*;

    fn feed(session: &mut MonitorSession, values: &[f64]) -> Vec<StopDecision> {
        let mut out = Vec::new();
        for (e, &v) in values.iter().enumerate() {
            let d = session.observe(e, v).unwrap();
            out.push(d);
            if d.is_stop() {
                break;
            }
        }
        out
    }

    fn history(val: &[f64]) -> TrainingHistory {
        let train: Vec<f64> = (0..val.len()).map(|t| 1.0 / (1.0 + t as f64)).collect();
        TrainingHistory::new(
            "h",
            LossCurve::from_values(train).unwrap(),
            LossCurve::from_values(val.to_vec()).unwrap(),
            None,
        )
        .unwrap()
    }

    /// Tiny KNN that calls a window overfit when it ends on a rise.
    fn rise_detector() -> ClassifierModel {
        let falling: Vec<f64> = (0..20).map(|t| 1.0 - 0.04 * f64::from(t)).collect();
        let vshape: Vec<f64> = (0..20).map(|t| (f64::from(t) - 8.0).abs() * 0.1).collect();
        let data = vec![
            (LossCurve::from_values(falling.clone()).unwrap(), OverfitLabel::NonOverfit),
            (LossCurve::from_values(falling.iter().map(|v| v * 2.0).collect()).unwrap(), OverfitLabel::NonOverfit),
            (LossCurve::from_values(vshape.clone()).unwrap(), OverfitLabel::Overfit),
            (LossCurve::from_values(vshape.iter().map(|v| v * 3.0).collect()).unwrap(), OverfitLabel::Overfit),
        ];
        let spec = ClassifierSpec::new(ClassifierParams::KnnDtw(KnnDtwParams {
            k: 1,
            dtw: DtwParams::exact(),
        }))
        .with_canonical_len(CanonicalLen::Fixed(20));
        fit(&spec, &data).unwrap()
    }

    #[test]
    fn session_requires_matching_model() {
        assert!(open_session(PreventionConfig::early_stop(20), None).is_ok());
        assert!(matches!(
            open_session(PreventionConfig::rolling(40, 10), None),
            Err(Error::ConfigError(_))
        ));
        assert!(open_session(PreventionConfig::whole_history(10), Some(rise_detector())).is_ok());
        assert!(open_session(PreventionConfig::early_stop(5), Some(rise_detector())).is_err());
        assert!(open_session(PreventionConfig::rolling(10, 20), Some(rise_detector())).is_err());
    }

    #[test]
    fn patience_two_hand_trace() {
        let mut s = open_session(PreventionConfig::early_stop(2), None).unwrap();
        let d = feed(&mut s, &[5.0, 4.0, 3.0, 4.0, 5.0]);
        assert_eq!(d.len(), 5);
        assert_eq!(
            d[4],
            StopDecision::Stop(StopPoint {
                stopped_epoch: 4,
                best_epoch: 2,
                best_value: 3.0
            })
        );
    }

    #[test]
    fn patience_twenty_stops_twenty_after_minimum() {
        let values: Vec<f64> = (0..120)
            .map(|t| {
                let t = f64::from(t);
                1.0 + 0.001 * (t - 50.0).powi(2)
            })
            .collect();
        let r = replay(&PreventionConfig::early_stop(20), None, &history(&values)).unwrap();
        assert!(r.triggered);
        assert_eq!((r.stop.stopped_epoch, r.stop.best_epoch), (70, 50));
        assert!(r.hit_optimal);
    }

    #[test]
    fn observe_rejects_out_of_order_epochs() {
        let mut s = open_session(PreventionConfig::early_stop(3), None).unwrap();
        s.observe(3, 1.0).unwrap();
        assert!(matches!(
            s.observe(3, 0.5),
            Err(Error::OutOfOrderEpoch { epoch: 3, last: 3 })
        ));
        assert!(s.observe(4, f64::NAN).is_err());
    }

    #[test]
    fn smoothed_reports_raw_best() {
        // raw minimum at epoch 3 is a one-epoch dip the average barely sees
        let values = [1.0, 0.9, 0.8, 0.1, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8];
        let r = replay(&PreventionConfig::smoothed(3, 3), None, &history(&values)).unwrap();
        assert!(r.triggered);
        assert_eq!(r.stop.best_epoch, 3);
        assert_eq!(r.stop.best_value, 0.1);
    }

    #[test]
    fn never_stopping_returns_global_minimum() {
        let values: Vec<f64> = (0..60).map(|t| 2.0 - 0.01 * f64::from(t)).collect();
        let h = history(&values);
        for cfg in [
            PreventionConfig::early_stop(5),
            PreventionConfig::smoothed(5, 10),
        ] {
            let r = replay(&cfg, None, &h).unwrap();
            assert!(!r.triggered);
            assert_eq!((r.stop.stopped_epoch, r.stop.best_epoch, r.delay), (59, 59, 0));
            assert!(r.hit_optimal);
        }
        let model = rise_detector();
        for cfg in [PreventionConfig::rolling(20, 10), PreventionConfig::whole_history(10)] {
            let r = replay(&cfg, Some(&model), &h).unwrap();
            assert!(!r.triggered, "{}", cfg.label());
        }
    }

    #[test]
    fn rolling_checks_start_at_the_window_boundary() {
        let model = rise_detector();
        let mut s = open_session(PreventionConfig::rolling(20, 5), Some(model)).unwrap();
        let values: Vec<f64> = (0..100).map(|t| 1.0 - 0.001 * f64::from(t)).collect();
        let mut checks = Vec::new();
        for (e, &v) in values.iter().enumerate() {
            s.observe(e, v).unwrap();
            if s.last_check() == Some(e) {
                checks.push(e);
            }
        }
        assert_eq!(&checks[..3], &[19, 24, 29]);
    }

    #[test]
    fn rolling_stop_reports_best_over_all_observed() {
        let model = rise_detector();
        let mut values: Vec<f64> = (0..30).map(|t| 1.0 - 0.03 * f64::from(t)).collect();
        values.extend((0..30).map(|t| 0.13 + 0.05 * f64::from(t)));
        let r = replay(&PreventionConfig::rolling(20, 10), Some(&model), &history(&values)).unwrap();
        assert!(r.triggered);
        assert_eq!(r.stop.best_epoch, 29);
        assert!(r.stop.stopped_epoch >= 39);
        assert!(r.hit_optimal);
    }

    #[test]
    fn zero_one_metric_needs_accuracy() {
        let h = history(&[1.0, 0.5, 0.7]);
        let cfg = PreventionConfig::early_stop(1).with_metric(MetricSource::ZeroOneLoss);
        assert!(replay(&cfg, None, &h).is_err());
        let acc = LossCurve::from_values(vec![0.5, 0.8, 0.7]).unwrap();
        let h = TrainingHistory::new("a", h.train_loss.clone(), h.val_loss.clone(), Some(acc)).unwrap();
        let r = replay(&cfg, None, &h).unwrap();
        assert_eq!((r.stop.stopped_epoch, r.stop.best_epoch), (2, 1));
        assert_eq!(r.accuracy_at_best, Some(0.8));
    }

    fn curve() -> impl proptest::strategy::Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..10.0, 2..120)
    }

    proptest! {
        #[test]
        fn early_stop_delay_equals_patience(values in curve(), p in 1usize..30) {
            let r = replay(&PreventionConfig::early_stop(p), None, &history(&values)).unwrap();
            if r.triggered {
                prop_assert_eq!(r.delay, p);
            }
            let prefix = &values[..=r.stop.stopped_epoch];
            let min = prefix.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(r.stop.best_value, min);
        }

        #[test]
        fn larger_patience_never_stops_earlier(values in curve(), p in 1usize..30, extra in 1usize..30) {
            let h = history(&values);
            let a = replay(&PreventionConfig::early_stop(p), None, &h).unwrap();
            let b = replay(&PreventionConfig::early_stop(p + extra), None, &h).unwrap();
            prop_assert!(b.stop.stopped_epoch >= a.stop.stopped_epoch);
        }

        #[test]
        fn smoothed_best_is_raw_prefix_minimum(values in curve(), p in 1usize..20, w in 1usize..12) {
            let r = replay(&PreventionConfig::smoothed(p, w), None, &history(&values)).unwrap();
            let prefix = &values[..=r.stop.stopped_epoch];
            prop_assert_eq!(Some(r.stop.best_epoch), argmin(prefix));
        }
    }
}
