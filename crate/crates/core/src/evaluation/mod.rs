//! Classification metrics, rank statistics and report assembly.

mod metrics;
mod report;
mod stats;

pub use metrics::*;
pub use report::*;
pub use stats::*;
