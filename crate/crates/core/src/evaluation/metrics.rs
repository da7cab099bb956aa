use serde::{Deserialize, Serialize};

use crate::history::OverfitLabel;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// One-vs-rest counts for each of the two classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub overfit: ClassCounts,
    pub non_overfit: ClassCounts,
}

impl ConfusionCounts {
    /// Tallies (truth, predicted) pairs. Pairs involving `Uncertain` are skipped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (OverfitLabel, OverfitLabel)>) -> Self {
        let mut c = ConfusionCounts::default();
        for (truth, pred) in pairs {
            c.add(truth, pred);
        }
        c
    }

    pub fn add(&mut self, truth: OverfitLabel, predicted: OverfitLabel) {
        use OverfitLabel::*;
        match (truth, predicted) {
            (Overfit, Overfit) => {
                self.overfit.tp += 1;
            }
            (NonOverfit, NonOverfit) => {
                self.non_overfit.tp += 1;
            }
            (Overfit, NonOverfit) => {
                self.overfit.fn_ += 1;
                self.non_overfit.fp += 1;
            }
            (NonOverfit, Overfit) => {
                self.non_overfit.fn_ += 1;
                self.overfit.fp += 1;
            }
            _ => {}
        }
    }

    pub fn total(&self) -> usize {
        self.overfit.tp + self.overfit.fn_ + self.non_overfit.tp + self.non_overfit.fn_
    }

    pub fn prf(&self) -> Prf {
        prf(self)
    }

    pub fn macro_f(&self) -> f64 {
        self.prf().macro_f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

impl ClassMetrics {
    pub fn from_counts(c: &ClassCounts) -> Self {
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        ClassMetrics {
            precision,
            recall,
            f: f_score(precision, recall),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub overfit: ClassMetrics,
    pub non_overfit: ClassMetrics,
    /// Unweighted mean of the two class F-scores.
    pub macro_f: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn prf(counts: &ConfusionCounts) -> Prf {
    let overfit = ClassMetrics::from_counts(&counts.overfit);
    let non_overfit = ClassMetrics::from_counts(&counts.non_overfit);
    Prf {
        overfit,
        non_overfit,
        macro_f: (overfit.f + non_overfit.f) / 2.0,
    }
}

/// Median of a sample; `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use OverfitLabel::*;

    #[test]
    fn f_score_examples() {
        assert_eq!(f_score(1.0, 1.0), 1.0);
        let f = f_score(0.96, 0.61);
        assert!((f - 0.746).abs() < 5e-4, "{f}");
        assert_eq!((f * 100.0).round() / 100.0, 0.75);
        assert_eq!(f_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn degenerate_denominators() {
        let c = ClassCounts { tp: 0, fp: 0, fn_: 5 };
        let m = ClassMetrics::from_counts(&c);
        assert_eq!((m.precision, m.recall, m.f), (0.0, 0.0, 0.0));
    }

    #[test]
    fn majority_predictor_on_29_11_split() {
        let pairs = (0..40).map(|i| (if i < 29 { NonOverfit } else { Overfit }, NonOverfit));
        let p = ConfusionCounts::from_pairs(pairs).prf();
        assert_eq!(p.non_overfit.recall, 1.0);
        assert_eq!(p.overfit.recall, 0.0);
        assert_eq!(p.overfit.f, 0.0);
    }

    #[test]
    fn perfect_predictions() {
        let pairs = [(Overfit, Overfit), (NonOverfit, NonOverfit), (Overfit, Overfit)];
        assert_eq!(ConfusionCounts::from_pairs(pairs).macro_f(), 1.0);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    proptest! {
        #[test]
        fn macro_f_ignores_order(
            pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let to_label = |b: bool| if b { Overfit } else { NonOverfit };
            let mut labelled: Vec<_> = pairs.iter().map(|&(t, p)| (to_label(t), to_label(p))).collect();
            let before = ConfusionCounts::from_pairs(labelled.clone()).macro_f();
            labelled.shuffle(&mut crate::seed::rng_from(seed));
            prop_assert_eq!(before, ConfusionCounts::from_pairs(labelled).macro_f());
        }
    }
}
