use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

use super::mlp::Task;

/// Disjoint, exhaustive train/validation/test row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Seeded 50/25/25 partition of `n` rows (sizes rounded to the nearest row).
    pub fn derived(n: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut seed::substream(seed, "tabular-split"));
        let n_train = (n as f64 * 0.5).round() as usize;
        let n_val = ((n as f64 * 0.25).round() as usize).min(n - n_train);
        let test = idx.split_off(n_train + n_val);
        let val = idx.split_off(n_train);
        Split { train: idx, val, test }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= n {
                return Err(Error::SchemaError(format!("split index {i} is out of range for {n} rows")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::SchemaError(format!("row {i} appears in more than one split")));
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::SchemaError(format!("row {i} is in no split")));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::SchemaError(format!("split manifest: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabularSchema {
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    pub name: String,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub task: Task,
    /// (features, target) rows.
    pub examples: Vec<(Vec<f64>, Vec<f64>)>,
    pub split: Split,
}

impl TabularDataset {
    pub fn new(
        name: impl Into<String>,
        n_inputs: usize,
        n_outputs: usize,
        task: Task,
        examples: Vec<(Vec<f64>, Vec<f64>)>,
        split: Split,
    ) -> Result<Self> {
        for (i, (x, t)) in examples.iter().enumerate() {
            if x.len() != n_inputs || t.len() != n_outputs {
                return Err(Error::SchemaError(format!(
                    "row {i} has {} inputs and {} outputs, expected {n_inputs} and {n_outputs}",
                    x.len(),
                    t.len()
                )));
            }
            if x.iter().chain(t).any(|v| !v.is_finite()) {
                return Err(Error::SchemaError(format!("row {i} contains a non-finite value")));
            }
        }
        split.validate(examples.len())?;
        Ok(TabularDataset {
            name: name.into(),
            n_inputs,
            n_outputs,
            task,
            examples,
            split,
        })
    }

    pub fn rows_of(&self, idx: &[usize]) -> Vec<(&[f64], &[f64])> {
        idx.iter()
            .map(|&i| (self.examples[i].0.as_slice(), self.examples[i].1.as_slice()))
            .collect()
    }
}

/// Reads a header-less CSV whose rows hold the inputs followed by the
/// outputs. Without a split manifest, a seeded 50/25/25 split is derived.
pub fn load_tabular_csv(
    path: impl AsRef<Path>,
    schema: TabularSchema,
    split_manifest: Option<&Path>,
    seed: u64,
) -> Result<TabularDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let width = schema.n_inputs + schema.n_outputs;
    let mut examples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::SchemaError(e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            return Err(Error::SchemaError(format!(
                "line {line}: expected {width} columns ({} inputs + {} outputs), got {}",
                schema.n_inputs,
                schema.n_outputs,
                record.len()
            )));
        }
        let mut values = Vec::with_capacity(width);
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::SchemaError(format!("line {line}: '{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(Error::SchemaError(format!("line {line}: non-finite value '{field}'")));
            }
            values.push(v);
        }
        let target = values.split_off(schema.n_inputs);
        examples.push((values, target));
    }
    let split = match split_manifest {
        Some(p) => Split::load(p)?,
        None => Split::derived(examples.len(), seed),
    };
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    TabularDataset::new(name, schema.n_inputs, schema.n_outputs, schema.task, examples, split)
}

fn one_hot(class: usize, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k == class { 1.0 } else { 0.0 }).collect()
}

/// The four XOR patterns, each repeated 32 times, as two-class one-hot data.
pub fn xor_dataset(seed: u64) -> TabularDataset {
    let mut examples = Vec::with_capacity(128);
    for _ in 0..32 {
        for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            let class = usize::from((a != b) as u8);
            examples.push((vec![a, b], one_hot(class, 2)));
        }
    }
    let split = Split::derived(examples.len(), seed);
    TabularDataset::new("xor", 2, 2, Task::Classification, examples, split).expect("valid xor data")
}

/// Small noisy two-class problem: two overlapping Gaussian blobs in 4
/// dimensions with 15% label noise, 96 rows. Small enough for wide networks
/// to memorize the training split.
pub fn toy_dataset(seed: u64) -> TabularDataset {
    let mut rng = seed::substream(seed, "toy-dataset");
    let n = 96;
    let examples = (0..n)
        .map(|i| {
            let class = i % 2;
            let centre = if class == 0 { -0.5 } else { 0.5 };
            let x: Vec<f64> = (0..4).map(|_| centre + gaussian(&mut rng)).collect();
            let noisy = if rng.random::<f64>() < 0.15 { 1 - class } else { class };
            (x, one_hot(noisy, 2))
        })
        .collect();
    let split = Split::derived(n, seed);
    TabularDataset::new("toy", 4, 2, Task::Classification, examples, split).expect("valid toy data")
}

pub(crate) fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
