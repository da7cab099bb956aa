use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{write_history_csv, Manifest, ManifestEntry, OverfitLabel, TrainingHistory};
use crate::seed;

use super::data::TabularDataset;
use super::mlp::{architecture_name, train_mlp, MlpSpec, DEFAULT_BATCH_SIZE, DEFAULT_LEARNING_RATE};

/// Hidden-layer widths of the twelve simulated architectures.
pub const ARCHITECTURES: [&[usize]; 12] = [
    &[2],
    &[4],
    &[8],
    &[16],
    &[24],
    &[32],
    &[2, 2],
    &[4, 2],
    &[4, 4],
    &[8, 4],
    &[8, 8],
    &[16, 8],
];

pub fn architecture_grid() -> Vec<Vec<usize>> {
    ARCHITECTURES.iter().map(|a| a.to_vec()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl CorpusParams {
    pub fn new(epochs: usize, seed: u64) -> Self {
        CorpusParams {
            epochs,
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            seed,
        }
    }
}

/// Trains every architecture on every dataset, dataset-major. Each run's
/// seed depends only on the top-level seed and the (dataset, architecture)
/// pair. Diverged runs keep their partial curves and carry `diverged=true`.
pub fn simulate_corpus(
    datasets: &[TabularDataset],
    architectures: &[Vec<usize>],
    params: &CorpusParams,
) -> Result<Vec<TrainingHistory>> {
    let mut out = Vec::with_capacity(datasets.len() * architectures.len());
    for data in datasets {
        for hidden in architectures {
            let arch = architecture_name(hidden);
            let run_seed = seed::derive_seed(params.seed, &format!("{}/{arch}", data.name));
            let mut spec = MlpSpec::new(data.n_inputs, data.n_outputs, hidden.clone(), data.task);
            spec.epochs = params.epochs;
            spec.learning_rate = params.learning_rate;
            spec.batch_size = params.batch_size;
            spec.seed = run_seed;
            let history = match train_mlp(&spec, data) {
                Ok(h) => h.with_meta("diverged", "false"),
                Err(Error::TrainingDiverged { epoch, partial }) => partial
                    .with_meta("diverged", "true")
                    .with_meta("diverged_epoch", epoch.to_string()),
                Err(e) => return Err(e),
            };
            out.push(history);
        }
    }
    Ok(out)
}

pub fn is_diverged(history: &TrainingHistory) -> bool {
    history.meta.get("diverged").is_some_and(|v| v == "true")
}

/// Writes `<id>.csv` per history plus `manifest.json` into `dir`.
pub fn write_corpus(
    dir: impl AsRef<Path>,
    histories: &[(TrainingHistory, Option<OverfitLabel>)],
) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(histories.len());
    for (history, label) in histories {
        let file = format!("{}.csv", history.id);
        write_history_csv(history, dir.join(&file))?;
        entries.push(ManifestEntry {
            history_path: file.into(),
            label: *label,
            meta: history.meta.clone(),
        });
    }
    let manifest = Manifest::new(entries);
    manifest.save(dir.join("manifest.json"))?;
    Ok(manifest)
}
