//! Time series forest: each tree sees mean, standard deviation and slope of
//! its own randomly drawn intervals and is grown with Gini impurity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{ls_slope, mean_sd, OverfitLabel};
use crate::seed;

use super::Prediction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TsfParams {
    pub n_trees: usize,
    pub min_interval: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    pub rng_seed: u64,
}

impl Default for TsfParams {
    fn default() -> Self {
        TsfParams {
            n_trees: 100,
            min_interval: 3,
            max_depth: None,
            rng_seed: 0,
        }
    }
}

impl TsfParams {
    pub(super) fn validate(&self, canonical_len: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::ConfigError("forest needs at least one tree".into()));
        }
        if self.min_interval < 3 {
            return Err(Error::ConfigError(format!(
                "min_interval must be at least 3, got {}",
                self.min_interval
            )));
        }
        if self.min_interval > canonical_len {
            return Err(Error::ConfigError(format!(
                "min_interval {} exceeds canonical length {canonical_len}",
                self.min_interval
            )));
        }
        if self.max_depth == Some(0) {
            return Err(Error::ConfigError("max_depth must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        label: OverfitLabel,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub intervals: Vec<Interval>,
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsfState {
    pub trees: Vec<Tree>,
}

const FEATURES_PER_INTERVAL: usize = 3;

fn interval_features(x: &[f64], intervals: &[Interval]) -> Vec<f64> {
    let mut out = Vec::with_capacity(intervals.len() * FEATURES_PER_INTERVAL);
    for iv in intervals {
        let seg = &x[iv.start..iv.start + iv.len];
        let (mean, sd) = mean_sd(seg);
        out.extend([mean, sd, ls_slope(seg)]);
    }
    out
}

fn sample_intervals(rng: &mut impl Rng, len: usize, min_interval: usize) -> Vec<Interval> {
    let count = (len as f64).sqrt().ceil() as usize;
    (0..count)
        .map(|_| {
            let width = rng.random_range(min_interval..=len);
            let start = rng.random_range(0..=len - width);
            Interval { start, len: width }
        })
        .collect()
}

fn gini(overfit: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = overfit as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

fn majority(labels: &[OverfitLabel], idx: &[usize]) -> OverfitLabel {
    let overfit = idx.iter().filter(|&&i| labels[i].is_overfit()).count();
    if 2 * overfit > idx.len() {
        OverfitLabel::Overfit
    } else {
        OverfitLabel::NonOverfit
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn best_split(features: &[Vec<f64>], labels: &[OverfitLabel], idx: &[usize]) -> Option<Split> {
    let n = idx.len();
    let total_overfit = idx.iter().filter(|&&i| labels[i].is_overfit()).count();
    let parent = gini(total_overfit, n);
    let n_features = features[idx[0]].len();
    let mut best: Option<Split> = None;
    let mut order: Vec<usize> = idx.to_vec();
    for f in 0..n_features {
        order.sort_by(|&a, &b| features[a][f].total_cmp(&features[b][f]).then(a.cmp(&b)));
        let mut left_overfit = 0;
        for pos in 0..n - 1 {
            if labels[order[pos]].is_overfit() {
                left_overfit += 1;
            }
            let lo = features[order[pos]][f];
            let hi = features[order[pos + 1]][f];
            if lo == hi {
                continue;
            }
            let n_left = pos + 1;
            let n_right = n - n_left;
            let impurity = (n_left as f64 * gini(left_overfit, n_left)
                + n_right as f64 * gini(total_overfit - left_overfit, n_right))
                / n as f64;
            if impurity < parent - 1e-12 && best.as_ref().is_none_or(|b| impurity < b.impurity) {
                let mid = lo + (hi - lo) / 2.0;
                best = Some(Split {
                    feature: f,
                    threshold: if mid < hi { mid } else { lo },
                    impurity,
                });
            }
        }
    }
    best
}

fn grow(
    nodes: &mut Vec<Node>,
    features: &[Vec<f64>],
    labels: &[OverfitLabel],
    idx: Vec<usize>,
    depth: usize,
    max_depth: Option<usize>,
) -> usize {
    let me = nodes.len();
    let label = majority(labels, &idx);
    nodes.push(Node::Leaf { label });
    let pure = idx.iter().all(|&i| labels[i] == labels[idx[0]]);
    if pure || idx.len() < 2 || max_depth.is_some_and(|d| depth >= d) {
        return me;
    }
    let Some(split) = best_split(features, labels, &idx) else {
        return me;
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
        .iter()
        .partition(|&&i| features[i][split.feature] <= split.threshold);
    let left = grow(nodes, features, labels, left_idx, depth + 1, max_depth);
    let right = grow(nodes, features, labels, right_idx, depth + 1, max_depth);
    nodes[me] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    me
}

impl Tree {
    fn predict(&self, x: &[f64]) -> OverfitLabel {
        let features = interval_features(x, &self.intervals);
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { label } => return *label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if features[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

impl TsfState {
    pub(super) fn fit(params: &TsfParams, xs: &[Vec<f64>], labels: &[OverfitLabel]) -> Self {
        let len = xs[0].len();
        let trees = (0..params.n_trees)
            .map(|t| {
                let mut rng = seed::substream(params.rng_seed, &format!("tsf-tree-{t}"));
                let intervals = sample_intervals(&mut rng, len, params.min_interval);
                let features: Vec<Vec<f64>> =
                    xs.iter().map(|x| interval_features(x, &intervals)).collect();
                let mut nodes = Vec::new();
                grow(
                    &mut nodes,
                    &features,
                    labels,
                    (0..xs.len()).collect(),
                    0,
                    params.max_depth,
                );
                Tree { intervals, nodes }
            })
            .collect();
        TsfState { trees }
    }

    pub(super) fn predict(&self, x: &[f64]) -> Prediction {
        let votes = self
            .trees
            .iter()
            .filter(|t| t.predict(x).is_overfit())
            .count();
        let score = votes as f64 / self.trees.len() as f64;
        let label = if 2 * votes > self.trees.len() {
            OverfitLabel::Overfit
        } else {
            OverfitLabel::NonOverfit
        };
        Prediction { label, score }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_of_pure_and_balanced_sets() {
        assert_eq!(gini(0, 4), 0.0);
        assert_eq!(gini(4, 4), 0.0);
        assert!((gini(2, 4) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn interval_count_is_ceil_sqrt() {
        let mut rng = seed::rng_from(3);
        let ivs = sample_intervals(&mut rng, 100, 8);
        assert_eq!(ivs.len(), 10);
        for iv in ivs {
            assert!(iv.len >= 8 && iv.start + iv.len <= 100);
        }
        assert_eq!(sample_intervals(&mut rng, 50, 3).len(), 8);
    }

    #[test]
    fn stump_separates_slope_sign() {
        let xs: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 } * (1.0 + i as f64 * 0.1);
                (0..20).map(|t| s * t as f64).collect()
            })
            .collect();
        let labels: Vec<OverfitLabel> = (0..10)
            .map(|i| {
                if i % 2 == 0 {
                    OverfitLabel::Overfit
                } else {
                    OverfitLabel::NonOverfit
                }
            })
            .collect();
        let params = TsfParams {
            n_trees: 1,
            max_depth: Some(1),
            ..Default::default()
        };
        let state = TsfState::fit(&params, &xs, &labels);
        assert_eq!(state.trees[0].nodes.len(), 3);
        for (x, l) in xs.iter().zip(&labels) {
            assert_eq!(state.predict(x).label, *l);
        }
    }
}
