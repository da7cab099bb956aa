//! Training-history data types, curve transforms and file formats.

mod curve;
mod io;
mod transform;

pub use curve::{argmin, LossCurve, MetricSource, MonitoredSeries, OverfitLabel, TrainingHistory};
pub use io::{
    format_float, parse_history_csv, read_history_csv, read_labels_csv, render_history_csv,
    write_history_csv, write_labels_csv, Manifest, ManifestEntry,
};
pub use transform::{moving_average, resample_linear, z_normalize};

pub(crate) use transform::{
    ls_slope, mean_sd, resample_values, trailing_mean, z_normalize_values,
};
