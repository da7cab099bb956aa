//! SAX-VSM: sliding-window SAX words, per-class tf-idf vectors and cosine
//! similarity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::history::{mean_sd, OverfitLabel};

use super::Prediction;

/// Windows flatter than this are only mean-centred, not scaled.
const FLAT_WINDOW_SD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaxVsmParams {
    /// Number of PAA segments per word.
    pub word_size: usize,
    pub alphabet_size: usize,
    pub window_len: usize,
}

impl Default for SaxVsmParams {
    fn default() -> Self {
        SaxVsmParams {
            word_size: 4,
            alphabet_size: 4,
            window_len: 25,
        }
    }
}

impl SaxVsmParams {
    pub(super) fn validate(&self, canonical_len: usize) -> Result<()> {
        if self.word_size < 2 {
            return Err(Error::ConfigError("word_size must be at least 2".into()));
        }
        if !(2..=10).contains(&self.alphabet_size) {
            return Err(Error::ConfigError(format!(
                "alphabet_size must lie in [2, 10], got {}",
                self.alphabet_size
            )));
        }
        if self.window_len < self.word_size {
            return Err(Error::ConfigError(format!(
                "window_len {} is shorter than word_size {}",
                self.window_len, self.word_size
            )));
        }
        if self.window_len > canonical_len {
            return Err(Error::ConfigError(format!(
                "window_len {} exceeds canonical length {canonical_len}",
                self.window_len
            )));
        }
        Ok(())
    }
}

/// Standard-normal quantiles splitting the real line into `alphabet_size`
/// equiprobable regions.
pub fn breakpoints(alphabet_size: usize) -> Vec<f64> {
    let normal = Normal::standard();
    (1..alphabet_size)
        .map(|i| normal.inverse_cdf(i as f64 / alphabet_size as f64))
        .collect()
}

/// Piecewise aggregate approximation with fractional weighting when the
/// window length is not a multiple of the segment count.
fn paa(x: &[f64], segments: usize) -> Vec<f64> {
    let n = x.len();
    if n.is_multiple_of(segments) {
        let width = n / segments;
        return x
            .chunks(width)
            .map(|c| c.iter().sum::<f64>() / width as f64)
            .collect();
    }
    // Each point is replicated `segments` times; each segment averages `n` replicas.
    let mut out = vec![0.0; segments];
    for (k, slot) in out.iter_mut().enumerate() {
        let lo = k * n;
        let hi = lo + n;
        let mut sum = 0.0;
        let mut pos = lo;
        while pos < hi {
            let point = pos / segments;
            let run_end = ((point + 1) * segments).min(hi);
            sum += x[point] * (run_end - pos) as f64;
            pos = run_end;
        }
        *slot = sum / n as f64;
    }
    out
}

fn symbol(value: f64, cuts: &[f64]) -> char {
    let idx = cuts.iter().take_while(|&&c| value >= c).count();
    (b'a' + idx as u8) as char
}

fn window_word(window: &[f64], params: &SaxVsmParams, cuts: &[f64]) -> String {
    let (mean, sd) = mean_sd(window);
    let normalized: Vec<f64> = if sd < FLAT_WINDOW_SD {
        window.iter().map(|v| v - mean).collect()
    } else {
        window.iter().map(|v| (v - mean) / sd).collect()
    };
    paa(&normalized, params.word_size)
        .into_iter()
        .map(|v| symbol(v, cuts))
        .collect()
}

/// Bag of SAX words over all sliding windows, with numerosity reduction.
fn bag_of_words(x: &[f64], params: &SaxVsmParams, cuts: &[f64]) -> BTreeMap<String, f64> {
    let mut bag = BTreeMap::new();
    let mut previous: Option<String> = None;
    for window in x.windows(params.window_len) {
        let word = window_word(window, params, cuts);
        if previous.as_deref() == Some(word.as_str()) {
            continue;
        }
        *bag.entry(word.clone()).or_insert(0.0) += 1.0;
        previous = Some(word);
    }
    bag
}

fn cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let dot: f64 = a
        .iter()
        .filter_map(|(w, x)| b.get(w).map(|y| x * y))
        .sum();
    let na = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaxVsmState {
    /// tf-idf weights of words seen in overfit training curves.
    pub overfit: BTreeMap<String, f64>,
    pub non_overfit: BTreeMap<String, f64>,
}

impl SaxVsmState {
    pub(super) fn fit(params: &SaxVsmParams, xs: &[Vec<f64>], labels: &[OverfitLabel]) -> Self {
        let cuts = breakpoints(params.alphabet_size);
        let mut overfit_tf: BTreeMap<String, f64> = BTreeMap::new();
        let mut non_tf: BTreeMap<String, f64> = BTreeMap::new();
        for (x, label) in xs.iter().zip(labels) {
            let target = if label.is_overfit() {
                &mut overfit_tf
            } else {
                &mut non_tf
            };
            for (word, count) in bag_of_words(x, params, &cuts) {
                *target.entry(word).or_insert(0.0) += count;
            }
        }
        const N_CLASSES: f64 = 2.0;
        let weigh = |own: &BTreeMap<String, f64>, other: &BTreeMap<String, f64>| {
            own.iter()
                .filter_map(|(word, &tf)| {
                    let df = 1.0 + f64::from(u8::from(other.contains_key(word)));
                    let w = (1.0 + tf.ln()) * (N_CLASSES / df).ln();
                    (w > 0.0).then(|| (word.clone(), w))
                })
                .collect::<BTreeMap<_, _>>()
        };
        SaxVsmState {
            overfit: weigh(&overfit_tf, &non_tf),
            non_overfit: weigh(&non_tf, &overfit_tf),
        }
    }

    pub(super) fn predict(&self, params: &SaxVsmParams, x: &[f64]) -> Prediction {
        let cuts = breakpoints(params.alphabet_size);
        let bag = if x.len() >= params.window_len {
            bag_of_words(x, params, &cuts)
        } else {
            BTreeMap::new()
        };
        let sim_overfit = cosine(&bag, &self.overfit);
        let sim_non = cosine(&bag, &self.non_overfit);
        let label = if sim_overfit > sim_non {
            OverfitLabel::Overfit
        } else {
            OverfitLabel::NonOverfit
        };
        Prediction {
            label,
            score: ((sim_overfit - sim_non + 1.0) / 2.0).clamp(0.0, 1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_three_breakpoints() {
        let b = breakpoints(3);
        assert_eq!(b.len(), 2);
        assert!((b[0] + 0.4307).abs() < 1e-3);
        assert!((b[1] - 0.4307).abs() < 1e-3);
        assert!((breakpoints(4)[1]).abs() < 1e-12);
    }

    #[test]
    fn paa_even_and_fractional() {
        assert_eq!(paa(&[1.0, 3.0, 5.0, 7.0], 2), vec![2.0, 6.0]);
        // 5 points into 2 segments: [1, 2, 3*0.5] and [3*0.5, 4, 5]
        let out = paa(&[1.0, 2.0, 3.0, 4.0, 5.0], 2);
        assert!((out[0] - (1.0 + 2.0 + 1.5) / 2.5).abs() < 1e-12);
        assert!((out[1] - (1.5 + 4.0 + 5.0) / 2.5).abs() < 1e-12);
    }

    #[test]
    fn symbols_follow_breakpoints() {
        let cuts = breakpoints(3);
        assert_eq!(symbol(-1.0, &cuts), 'a');
        assert_eq!(symbol(0.0, &cuts), 'b');
        assert_eq!(symbol(2.0, &cuts), 'c');
    }

    #[test]
    fn numerosity_reduction_skips_repeats() {
        let params = SaxVsmParams {
            word_size: 2,
            alphabet_size: 3,
            window_len: 4,
        };
        let flat = vec![0.0; 20];
        let bag = bag_of_words(&flat, &params, &breakpoints(3));
        assert_eq!(bag.len(), 1);
        assert_eq!(bag["bb"], 1.0);
    }

    #[test]
    fn shared_words_carry_no_weight() {
        let params = SaxVsmParams {
            word_size: 2,
            alphabet_size: 3,
            window_len: 4,
        };
        let up: Vec<f64> = (0..12).map(f64::from).collect();
        let flat = vec![0.0; 12];
        let xs = vec![up.clone(), flat.clone(), up];
        let labels = vec![
            OverfitLabel::Overfit,
            OverfitLabel::NonOverfit,
            OverfitLabel::Overfit,
        ];
        let state = SaxVsmState::fit(&params, &xs, &labels);
        assert!(state.overfit.contains_key("ac"));
        assert!(state.non_overfit.contains_key("bb"));
        let w = state.overfit["ac"];
        assert!((w - (1.0 + 2.0f64.ln()) * 2.0f64.ln()).abs() < 1e-12);
        let p = state.predict(&params, &flat);
        assert_eq!(p.label, OverfitLabel::NonOverfit);
        assert_eq!(p.score, 0.0);
    }
}
