use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::classifiers::ClassifierModel;
use crate::detectors::{detect, Detector};
use crate::error::{Error, Result};
use crate::history::{OverfitLabel, TrainingHistory};
use crate::prevention::{replay, PreventionConfig, Strategy};

use super::{cliffs_delta, median, mann_whitney_u, CliffsDelta, ConfusionCounts, MannWhitney, Prf, DEFAULT_ALPHA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub id: String,
    pub truth: OverfitLabel,
    pub predicted: OverfitLabel,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub approach: String,
    pub n: usize,
    pub prf: Prf,
    /// Wall-clock seconds spent fitting, when the caller measured it.
    pub training_time_s: Option<f64>,
    /// Mean wall-clock milliseconds per detected history.
    pub inference_time_ms: f64,
    pub records: Vec<DetectionRecord>,
}

/// Runs the detector over every labelled history. Uncertain ground truth is
/// skipped.
pub fn evaluate_detection(
    approach: impl Into<String>,
    model: &Detector,
    test: &[(TrainingHistory, OverfitLabel)],
    training_time: Option<Duration>,
) -> Result<DetectionReport> {
    let mut counts = ConfusionCounts::default();
    let mut records = Vec::with_capacity(test.len());
    let mut spent = Duration::ZERO;
    for (history, truth) in test {
        if *truth == OverfitLabel::Uncertain {
            continue;
        }
        let started = Instant::now();
        let d = detect(model, history)?;
        spent += started.elapsed();
        counts.add(*truth, d.label);
        records.push(DetectionRecord {
            id: history.id.clone(),
            truth: *truth,
            predicted: d.label,
            score: d.score,
        });
    }
    if records.is_empty() {
        return Err(Error::InvalidInput("no labelled histories to evaluate".into()));
    }
    Ok(DetectionReport {
        approach: approach.into(),
        n: records.len(),
        prf: counts.prf(),
        training_time_s: training_time.map(|t| t.as_secs_f64()),
        inference_time_ms: spent.as_secs_f64() * 1e3 / records.len() as f64,
        records,
    })
}

/// A prevention strategy under evaluation.
#[derive(Debug, Clone)]
pub struct StrategyEntry {
    pub name: String,
    pub config: PreventionConfig,
    pub model: Option<ClassifierModel>,
}

impl StrategyEntry {
    pub fn new(config: PreventionConfig, model: Option<ClassifierModel>) -> Self {
        StrategyEntry {
            name: config.label(),
            config,
            model,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreventionStats {
    pub strategy: String,
    pub config: PreventionConfig,
    pub n: usize,
    /// Fraction of histories whose returned best epoch is the global optimum.
    pub optimal_rate: f64,
    pub triggered: usize,
    pub delays: Vec<usize>,
    pub median_delay: f64,
    /// Mean validation accuracy at the returned best epoch, over histories
    /// that record accuracy.
    pub average_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub mann_whitney: MannWhitney,
    pub cliffs_delta: CliffsDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreventionReport {
    pub stats: Vec<PreventionStats>,
    /// Delay comparisons. Each classifier strategy is compared with the
    /// early-stopping run whose patience equals its window (or step, for
    /// whole-history monitors); without such matches every pair is compared.
    pub significance: Vec<Comparison>,
}

pub fn evaluate_prevention(strategies: &[StrategyEntry], histories: &[TrainingHistory]) -> Result<PreventionReport> {
    if histories.is_empty() {
        return Err(Error::InvalidInput("no histories to replay".into()));
    }
    let mut stats = Vec::with_capacity(strategies.len());
    for entry in strategies {
        let mut hits = 0;
        let mut triggered = 0;
        let mut delays = Vec::with_capacity(histories.len());
        let mut accuracies = Vec::new();
        for history in histories {
            let r = replay(&entry.config, entry.model.as_ref(), history)?;
            hits += usize::from(r.hit_optimal);
            triggered += usize::from(r.triggered);
            delays.push(r.delay);
            accuracies.extend(r.accuracy_at_best);
        }
        let as_f64: Vec<f64> = delays.iter().map(|&d| d as f64).collect();
        stats.push(PreventionStats {
            strategy: entry.name.clone(),
            config: entry.config,
            n: histories.len(),
            optimal_rate: hits as f64 / histories.len() as f64,
            triggered,
            median_delay: median(&as_f64).expect("non-empty"),
            average_accuracy: (!accuracies.is_empty())
                .then(|| accuracies.iter().sum::<f64>() / accuracies.len() as f64),
            delays,
        });
    }
    let significance = comparison_pairs(strategies)
        .into_iter()
        .map(|(i, j)| compare(&stats[i], &stats[j]))
        .collect::<Result<Vec<_>>>()?;
    Ok(PreventionReport { stats, significance })
}

fn matched_parameter(config: &PreventionConfig) -> usize {
    match config.strategy {
        Strategy::RollingWindow => config.window,
        Strategy::WholeHistory => config.step,
        Strategy::EarlyStop | Strategy::EarlyStopSmoothed => config.patience,
    }
}

fn comparison_pairs(strategies: &[StrategyEntry]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, c) in strategies.iter().enumerate() {
        if !c.config.strategy.uses_classifier() {
            continue;
        }
        for (j, e) in strategies.iter().enumerate() {
            if e.config.strategy == Strategy::EarlyStop
                && matched_parameter(&e.config) == matched_parameter(&c.config)
            {
                pairs.push((i, j));
            }
        }
    }
    if pairs.is_empty() {
        for i in 0..strategies.len() {
            for j in i + 1..strategies.len() {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

fn compare(a: &PreventionStats, b: &PreventionStats) -> Result<Comparison> {
    let x: Vec<f64> = a.delays.iter().map(|&d| d as f64).collect();
    let y: Vec<f64> = b.delays.iter().map(|&d| d as f64).collect();
    Ok(Comparison {
        a: a.strategy.clone(),
        b: b.strategy.clone(),
        mann_whitney: mann_whitney_u(&x, &y, DEFAULT_ALPHA)?,
        cliffs_delta: cliffs_delta(&x, &y)?,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detection: Vec<DetectionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prevention: Option<PreventionReport>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Markdown tables: detection quality and timing, prevention outcome per
    /// strategy, and delay comparisons.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        if !self.detection.is_empty() {
            out.push_str("## Detection\n\n");
            out.push_str("| Approach | Overfit P | Overfit R | Overfit F | Non-overfit P | Non-overfit R | Non-overfit F | Avg F | Training time (s) | Inference time (ms) |\n");
            out.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
            for d in &self.detection {
                let (o, n) = (d.prf.overfit, d.prf.non_overfit);
                let train = d.training_time_s.map_or("-".to_string(), |t| format!("{t:.3}"));
                let _ = writeln!(
                    out,
                    "| {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {} | {:.3} |",
                    d.approach, o.precision, o.recall, o.f, n.precision, n.recall, n.f, d.prf.macro_f, train,
                    d.inference_time_ms
                );
            }
            out.push('\n');
        }
        if let Some(p) = &self.prevention {
            out.push_str("## Prevention\n\n");
            out.push_str("| Strategy | Optimal rate | Median delay | Average accuracy | Triggered |\n");
            out.push_str("|---|---|---|---|---|\n");
            for s in &p.stats {
                let acc = s.average_accuracy.map_or("-".to_string(), |a| format!("{a:.3}"));
                let _ = writeln!(
                    out,
                    "| {} | {:.2} | {:.1} | {} | {}/{} |",
                    s.strategy, s.optimal_rate, s.median_delay, acc, s.triggered, s.n
                );
            }
            if !p.significance.is_empty() {
                out.push_str("\n### Delay comparisons\n\n");
                out.push_str("| A | B | U(A) | p | Significant | Cliff's delta | Magnitude |\n");
                out.push_str("|---|---|---|---|---|---|---|\n");
                for c in &p.significance {
                    let _ = writeln!(
                        out,
                        "| {} | {} | {} | {:.4} | {} | {:.3} | {:?} |",
                        c.a,
                        c.b,
                        c.mann_whitney.u_x,
                        c.mann_whitney.p_value,
                        if c.mann_whitney.significant { "yes" } else { "no" },
                        c.cliffs_delta.delta,
                        c.cliffs_delta.magnitude
                    );
                }
            }
            out.push('\n');
        }
        out
    }
}
