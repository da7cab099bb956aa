use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "overfitguard", version, about = "Detect and prevent overfitting from training histories")]
pub struct Cli {
    /// Seed for every random choice (CV folds, forests, simulations).
    #[arg(long, global = true, env = "OVERFITGUARD_SEED", default_value_t = 0)]
    pub seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Suppress informational messages on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Newline-delimited JSON records.
    Json,
    /// Human-readable tables.
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label histories with the rule-based heuristic.
    Label(LabelArgs),
    /// Fit a detector on a labelled manifest.
    Train(TrainArgs),
    /// Label finished histories with a saved model.
    Detect(DetectArgs),
    /// Serve the NDJSON stop/continue protocol on stdin/stdout.
    Monitor(MonitorArgs),
    /// Generate a labelled corpus of training histories.
    Simulate(SimulateArgs),
    /// Score detectors or stopping strategies and write a report.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    Decrease,
    Increase,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    pub manifest: PathBuf,

    #[arg(long, default_value_t = 0.2)]
    pub inc_p: f64,
    #[arg(long, default_value_t = 0.2)]
    pub dec_p: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gap_p: f64,

    /// Required movement of the validation loss over the final segment.
    #[arg(long, value_enum, default_value_t = Direction::Decrease)]
    pub tail_direction: Direction,

    /// Choose thresholds by grid search against the manifest's labels.
    #[arg(long)]
    pub grid_search: bool,

    /// Labels CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DetectorChoice {
    KnnDtw,
    Tsf,
    SaxVsm,
    Spearman,
    Pearson,
    LaggedPearson,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub manifest: PathBuf,

    #[arg(long, value_enum)]
    pub classifier: DetectorChoice,

    /// `default` or a JSON file holding a list of classifier specs.
    #[arg(long, default_value = "default")]
    pub grid: String,

    /// Resampling length used by the default grid.
    #[arg(long, default_value_t = 100)]
    pub canonical_len: usize,

    /// Train on fixed-length windows cut from the curves (requires
    /// `onset_epoch` metadata on overfit histories, as written by
    /// `simulate --mode synthetic`). Sets the canonical length to the window.
    #[arg(long)]
    pub windows: Option<usize>,

    #[arg(long, default_value_t = 10)]
    pub window_step: usize,

    /// Lag of the lagged-Pearson correlation.
    #[arg(long, default_value_t = 5)]
    pub lag: usize,

    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,

    /// Where to write the cross-validation report; defaults next to the model.
    #[arg(long)]
    pub cv_report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    pub model: PathBuf,
    #[arg(required = true)]
    pub histories: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyChoice {
    Es,
    EsSmoothed,
    Rolling,
    Whole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricChoice {
    ValLoss,
    ZeroOne,
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    #[arg(long, value_enum, default_value_t = StrategyChoice::Es)]
    pub strategy: StrategyChoice,
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
    #[arg(long, default_value_t = 10)]
    pub smoothing_window: usize,
    #[arg(long, default_value_t = 40)]
    pub window: usize,
    #[arg(long, default_value_t = 10)]
    pub step: usize,
    #[arg(long, default_value_t = 0.0)]
    pub min_delta: f64,
    /// Classifier model for the rolling and whole-history strategies.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// What the streamed values are; recorded in the session config.
    #[arg(long, value_enum, default_value_t = MetricChoice::ValLoss)]
    pub metric: MetricChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimulateMode {
    Synthetic,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskChoice {
    Regression,
    Classification,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub mode: SimulateMode,

    #[arg(long)]
    pub out: PathBuf,

    /// Number of synthetic curves.
    #[arg(long, default_value_t = 240)]
    pub n: usize,

    /// Fraction of synthetic curves drawn from the overfit family.
    #[arg(long, default_value_t = 0.5)]
    pub overfit_fraction: f64,

    /// Epochs per synthetic curve.
    #[arg(long, default_value_t = 100)]
    pub length: usize,

    /// Upper bound of the synthetic noise sd relative to the initial loss.
    #[arg(long, default_value_t = 0.02)]
    pub max_noise: f64,

    /// Tabular datasets for MLP mode: `toy`, `xor`, or a CSV path (repeatable).
    #[arg(long = "dataset", default_value = "toy")]
    pub datasets: Vec<String>,

    /// Input width of CSV datasets.
    #[arg(long)]
    pub n_inputs: Option<usize>,
    /// Output width of CSV datasets.
    #[arg(long)]
    pub n_outputs: Option<usize>,
    #[arg(long, value_enum, default_value_t = TaskChoice::Classification)]
    pub task: TaskChoice,
    /// Split manifest for a single CSV dataset.
    #[arg(long)]
    pub split: Option<PathBuf>,

    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Score detectors on the manifest's labelled histories.
    #[arg(long, conflicts_with = "prevention", required_unless_present = "prevention")]
    pub detection: bool,

    /// Replay stopping strategies over the manifest's histories.
    #[arg(long)]
    pub prevention: bool,

    pub manifest: PathBuf,

    /// Detector model files (detection mode; repeatable).
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,

    /// Strategy specs (prevention mode; repeatable): `es:P`,
    /// `es-smoothed:P[:MA]`, `rolling:W[:S]`, `whole[:S]`.
    #[arg(long = "strategy")]
    pub strategies: Vec<String>,

    /// Add early stopping for every patience `LO:HI:STEP`, e.g. `5:115:5`.
    #[arg(long)]
    pub patience_sweep: Option<String>,

    /// Classifier model used by rolling and whole-history strategies.
    #[arg(long)]
    pub monitor_model: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = MetricChoice::ValLoss)]
    pub metric: MetricChoice,

    /// Report path; JSON is written there and Markdown next to it (`.md`).
    #[arg(long)]
    pub out: PathBuf,
}
