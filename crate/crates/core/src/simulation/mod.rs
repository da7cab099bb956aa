//! Labelled training histories: MLP runs on small tabular datasets and
//! parametric synthetic curves with oracle labels.

mod corpus;
mod data;
mod mlp;
mod synthetic;

pub use corpus::{architecture_grid, is_diverged, simulate_corpus, write_corpus, CorpusParams, ARCHITECTURES};
pub use data::{load_tabular_csv, toy_dataset, xor_dataset, Split, TabularDataset, TabularSchema};
pub use mlp::{architecture_name, train_mlp, Mlp, MlpSpec, Task, DEFAULT_BATCH_SIZE, DEFAULT_LEARNING_RATE};
pub use synthetic::{
    generate_synthetic, oracle_windows, sample_spec, synthetic_corpus, CurveFamily, SyntheticCorpusConfig, SyntheticCurveSpec,
};
