//! Rule-based labeller: a run is overfit when both losses fall early on, the
//! final stretch shows the configured validation trend while training loss
//! still falls, and the final train/validation gap is large.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{ClassMetrics, ConfusionCounts};
use crate::history::{ls_slope, OverfitLabel, TrainingHistory};

/// Fractions of the run inspected by each condition, all in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicThresholds {
    /// Leading share of epochs where both losses must fall.
    pub inc_p: f64,
    /// Trailing share of epochs checked for the validation trend.
    pub dec_p: f64,
    /// Minimum final gap as a share of the summed final losses.
    pub gap_p: f64,
}

impl HeuristicThresholds {
    pub fn new(inc_p: f64, dec_p: f64, gap_p: f64) -> Result<Self> {
        let t = HeuristicThresholds { inc_p, dec_p, gap_p };
        t.validate()?;
        Ok(t)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        for (name, v) in [("inc_p", self.inc_p), ("dec_p", self.dec_p), ("gap_p", self.gap_p)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::ConfigError(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Required sign of the validation slope over the trailing segment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailDirection {
    /// Validation loss still falls at the end (the rule as written).
    #[default]
    Decrease,
    /// Validation loss rises at the end.
    Increase,
}

impl TailDirection {
    fn holds(self, slope: f64) -> bool {
        match self {
            TailDirection::Decrease => slope < 0.0,
            TailDirection::Increase => slope > 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicModel {
    pub thresholds: HeuristicThresholds,
    #[serde(default)]
    pub tail_val_direction: TailDirection,
}

impl HeuristicModel {
    pub fn new(thresholds: HeuristicThresholds) -> Self {
        HeuristicModel {
            thresholds,
            tail_val_direction: TailDirection::default(),
        }
    }

    pub fn with_direction(mut self, direction: TailDirection) -> Self {
        self.tail_val_direction = direction;
        self
    }
}

/// Epochs covered by a fraction `p` of an `n`-epoch run.
fn segment_len(n: usize, p: f64, name: &str) -> Result<usize> {
    let exact = n as f64 * p;
    if exact < 2.0 {
        return Err(Error::SegmentTooShort(format!(
            "{name} = {p} covers {exact:.2} of {n} epochs; at least 2 are needed"
        )));
    }
    Ok(((exact - 1e-9).ceil() as usize).min(n))
}

fn head_falls(h: &TrainingHistory, len: usize) -> bool {
    ls_slope(&h.train_loss.values()[..len]) < 0.0 && ls_slope(&h.val_loss.values()[..len]) < 0.0
}

fn tail_holds(h: &TrainingHistory, len: usize, direction: TailDirection) -> bool {
    let n = h.len();
    ls_slope(&h.train_loss.values()[n - len..]) < 0.0
        && direction.holds(ls_slope(&h.val_loss.values()[n - len..]))
}

/// Final validation-minus-training loss relative to their sum.
fn relative_gap(h: &TrainingHistory) -> (f64, f64) {
    let n = h.len();
    let t = h.train_loss.values()[n - 1];
    let v = h.val_loss.values()[n - 1];
    (v - t, v + t)
}

fn gap_exceeds(gap: (f64, f64), gap_p: f64) -> bool {
    gap.0 > gap_p * gap.1
}

pub fn heuristic_label(history: &TrainingHistory, model: &HeuristicModel) -> Result<OverfitLabel> {
    let t = &model.thresholds;
    t.validate()?;
    let n = history.len();
    if n < 4 {
        return Err(Error::SegmentTooShort(format!(
            "history '{}' has {n} epochs; at least 4 are needed",
            history.id
        )));
    }
    let head = segment_len(n, t.inc_p, "inc_p")?;
    let tail = segment_len(n, t.dec_p, "dec_p")?;
    let overfit = head_falls(history, head)
        && tail_holds(history, tail, model.tail_val_direction)
        && gap_exceeds(relative_gap(history), t.gap_p);
    Ok(if overfit {
        OverfitLabel::Overfit
    } else {
        OverfitLabel::NonOverfit
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicSearch {
    pub model: HeuristicModel,
    /// Metrics of the overfit class, which the search maximizes.
    pub overfit: ClassMetrics,
    pub macro_f: f64,
}

/// `lo, lo + step, ..., hi` as exact hundredths.
fn hundredths(lo: u32, hi: u32, step: u32) -> Vec<f64> {
    (lo..=hi).step_by(step as usize).map(|i| f64::from(i) / 100.0).collect()
}

/// Grid search over inc_p, dec_p in {0.10, 0.15, ..., 0.50} and
/// gap_p in {0.01, ..., 0.50}, maximizing the overfit-class F-score.
/// Ties go to the lexicographically smallest (inc_p, dec_p, gap_p).
pub fn heuristic_grid_search(
    labelled: &[(TrainingHistory, OverfitLabel)],
    direction: TailDirection,
) -> Result<HeuristicSearch> {
    let data: Vec<&(TrainingHistory, OverfitLabel)> = labelled
        .iter()
        .filter(|(_, l)| *l != OverfitLabel::Uncertain)
        .collect();
    let overfit = data.iter().filter(|(_, l)| l.is_overfit()).count();
    if overfit == 0 || overfit == data.len() {
        return Err(Error::DegenerateCalibration);
    }
    for (h, _) in &data {
        if h.len() < 4 {
            return Err(Error::SegmentTooShort(format!(
                "history '{}' has {} epochs; at least 4 are needed",
                h.id,
                h.len()
            )));
        }
    }
    let fractions = hundredths(10, 50, 5);
    let gaps = hundredths(1, 50, 1);

    // Conditions 1 and 2 depend on one fraction each; precompute them.
    let mut head = Vec::with_capacity(fractions.len());
    let mut tail = Vec::with_capacity(fractions.len());
    for &p in &fractions {
        let mut hv = Vec::with_capacity(data.len());
        let mut tv = Vec::with_capacity(data.len());
        for (h, _) in &data {
            let len = segment_len(h.len(), p, "fraction")?;
            hv.push(head_falls(h, len));
            tv.push(tail_holds(h, len, direction));
        }
        head.push(hv);
        tail.push(tv);
    }
    let rel_gaps: Vec<(f64, f64)> = data.iter().map(|(h, _)| relative_gap(h)).collect();

    let mut best: Option<(HeuristicSearch, f64)> = None;
    for (i, &inc_p) in fractions.iter().enumerate() {
        for (j, &dec_p) in fractions.iter().enumerate() {
            for &gap_p in &gaps {
                let counts = ConfusionCounts::from_pairs(data.iter().enumerate().map(|(k, (_, truth))| {
                    let hit = head[i][k] && tail[j][k] && gap_exceeds(rel_gaps[k], gap_p);
                    let predicted = if hit {
                        OverfitLabel::Overfit
                    } else {
                        OverfitLabel::NonOverfit
                    };
                    (*truth, predicted)
                }));
                let prf = counts.prf();
                if best.as_ref().is_none_or(|(_, f)| prf.overfit.f > *f) {
                    let model = HeuristicModel {
                        thresholds: HeuristicThresholds { inc_p, dec_p, gap_p },
                        tail_val_direction: direction,
                    };
                    best = Some((
                        HeuristicSearch {
                            model,
                            overfit: prf.overfit,
                            macro_f: prf.macro_f,
                        },
                        prf.overfit.f,
                    ));
                }
            }
        }
    }
    Ok(best.expect("grid is non-empty").0)
}
