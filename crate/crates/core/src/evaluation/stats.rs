//! Two-sample rank statistics: Mann-Whitney U and Cliff's delta.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Largest smaller-sample size for which the exact null distribution is used.
pub const EXACT_MAX_SMALL: usize = 8;
/// Larger-sample cap for the exact path; beyond it the normal approximation
/// is used even for small samples.
pub const EXACT_MAX_LARGE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u_x: f64,
    pub u_y: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub significant: bool,
    pub method: PValueMethod,
}

fn check_sample(name: &str, s: &[f64]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::InvalidSample(format!("sample {name} is empty")));
    }
    if s.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidSample(format!("sample {name} contains NaN")));
    }
    Ok(())
}

/// Average ranks (1-based) of the pooled samples plus the tie-group sizes.
fn pooled_ranks(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

/// Null distribution of U for sample sizes (n, m) without ties, as
/// probabilities indexed by u in `0..=n*m`.
///
/// Uses the recurrence c(n, m, u) = c(n-1, m, u-m) + c(n, m-1, u) over
/// arrangements, normalized by C(n+m, n).
pub fn exact_u_distribution(n: usize, m: usize) -> Vec<f64> {
    // layer[i] = counts for (i, j) at the current j
    let mut layer: Vec<Vec<f64>> = (0..=n).map(|_| vec![1.0]).collect();
    for j in 1..=m {
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        next.push(vec![1.0]);
        for i in 1..=n {
            let mut counts = vec![0.0; i * j + 1];
            // c(i-1, j, u - j)
            for (u, c) in next[i - 1].iter().enumerate() {
                counts[u + j] += c;
            }
            // c(i, j-1, u)
            for (u, c) in layer[i].iter().enumerate() {
                counts[u] += c;
            }
            next.push(counts);
        }
        layer = next;
    }
    let counts = layer.swap_remove(n);
    let total: f64 = counts.iter().sum();
    counts.into_iter().map(|c| c / total).collect()
}

/// Two-sided Mann-Whitney U test at level `alpha`.
///
/// Samples without ties whose smaller size is at most 8 use the exact null
/// distribution; otherwise a normal approximation with tie-corrected variance
/// and a 0.5 continuity correction.
pub fn mann_whitney_u(x: &[f64], y: &[f64], alpha: f64) -> Result<MannWhitney> {
    check_sample("x", x)?;
    check_sample("y", y)?;
    let (n, m) = (x.len(), y.len());
    let (ranks, ties) = pooled_ranks(x, y);
    let rank_sum_x: f64 = ranks[..n].iter().sum();
    let u_x = rank_sum_x - (n * (n + 1)) as f64 / 2.0;
    let nm = (n * m) as f64;
    let u_y = nm - u_x;

    let exact = ties.is_empty() && n.min(m) <= EXACT_MAX_SMALL && n.max(m) <= EXACT_MAX_LARGE;
    let (p_value, method) = if exact {
        let dist = exact_u_distribution(n, m);
        let u = u_x.round() as usize;
        let lower: f64 = dist[..=u].iter().sum();
        let upper: f64 = dist[u..].iter().sum();
        ((2.0 * lower.min(upper)).min(1.0), PValueMethod::Exact)
    } else {
        let big_n = (n + m) as f64;
        let tie_term: f64 = ties
            .iter()
            .map(|&t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum::<f64>()
            / (big_n * (big_n - 1.0));
        let var = nm / 12.0 * ((big_n + 1.0) - tie_term);
        let p = if var <= 0.0 {
            1.0
        } else {
            let z = ((u_x - nm / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
            erfc(z / std::f64::consts::SQRT_2).min(1.0)
        };
        (p, PValueMethod::Normal)
    };
    Ok(MannWhitney {
        u_x,
        u_y,
        p_value,
        significant: p_value < alpha,
        method,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Magnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl Magnitude {
    pub fn of(delta: f64) -> Self {
        let d = delta.abs();
        if d < 0.147 {
            Magnitude::Negligible
        } else if d < 0.33 {
            Magnitude::Small
        } else if d < 0.474 {
            Magnitude::Medium
        } else {
            Magnitude::Large
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CliffsDelta {
    pub delta: f64,
    pub magnitude: Magnitude,
}

/// Cliff's delta: (#{x > y} − #{x < y}) / (n·m), counted by binary search
/// over the sorted second sample.
pub fn cliffs_delta(x: &[f64], y: &[f64]) -> Result<CliffsDelta> {
    check_sample("x", x)?;
    check_sample("y", y)?;
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut dominance: i64 = 0;
    for &v in x {
        let below = sorted.partition_point(|&w| w < v) as i64;
        let not_above = sorted.partition_point(|&w| w <= v) as i64;
        let above = sorted.len() as i64 - not_above;
        dominance += below - above;
    }
    let delta = dominance as f64 / (x.len() * y.len()) as f64;
    Ok(CliffsDelta {
        delta,
        magnitude: Magnitude::of(delta),
    })
}
