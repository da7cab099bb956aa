//! A small fully connected network trained with mini-batch SGD.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{LossCurve, TrainingHistory};
use crate::seed;

use super::data::TabularDataset;

pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_BATCH_SIZE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Linear output, mean squared error.
    Regression,
    /// Softmax output, cross-entropy against one-hot targets.
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden: Vec<usize>,
    pub task: Task,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Multiplier on the Glorot-uniform initialization range.
    #[serde(default = "one")]
    pub init_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl MlpSpec {
    pub fn new(input_dim: usize, output_dim: usize, hidden: Vec<usize>, task: Task) -> Self {
        MlpSpec {
            input_dim,
            output_dim,
            hidden,
            task,
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            epochs: 100,
            seed: 0,
            init_scale: 1.0,
        }
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden);
        dims.push(self.output_dim);
        dims
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::ConfigError(m));
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return err("layer widths must be positive".into());
        }
        if self.task == Task::Classification && self.output_dim < 2 {
            return err("classification needs at least two outputs".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return err(format!("invalid learning rate {}", self.learning_rate));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return err("batch size and epochs must be positive".into());
        }
        Ok(())
    }
}

/// Network with all weights and biases in one flat vector. Layer `l` stores
/// its `out x in` weight matrix row-major followed by `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    task: Task,
    pub params: Vec<f64>,
}

impl Mlp {
    pub fn zeros(dims: Vec<usize>, task: Task) -> Self {
        let n = dims.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        Mlp {
            dims,
            task,
            params: vec![0.0; n],
        }
    }

    /// Glorot-uniform weights scaled by `scale`; zero biases.
    pub fn init(dims: Vec<usize>, task: Task, scale: f64, rng: &mut impl Rng) -> Self {
        let mut net = Mlp::zeros(dims, task);
        let mut offset = 0;
        for w in net.dims.clone().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let r = scale * (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
            }
            offset += fan_out * (fan_in + 1);
        }
        net
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Activations of every layer, input first. The last entry is the
    /// network output (softmax probabilities for classification).
    fn forward_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let mut offset = 0;
        let n_layers = self.dims.len() - 1;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_out * (n_in + 1)];
            let input = &acts[l];
            let mut z: Vec<f64> = (0..n_out)
                .map(|j| b[j] + w[j * n_in..(j + 1) * n_in].iter().zip(input).map(|(a, x)| a * x).sum::<f64>())
                .collect();
            if l + 1 < n_layers {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            } else if self.task == Task::Classification {
                softmax_in_place(&mut z);
            }
            acts.push(z);
            offset += n_out * (n_in + 1);
        }
        acts
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.forward_all(x).pop().expect("output layer")
    }

    fn example_loss(&self, out: &[f64], target: &[f64]) -> f64 {
        match self.task {
            Task::Regression => {
                out.iter().zip(target).map(|(o, t)| (o - t).powi(2)).sum::<f64>() / out.len() as f64
            }
            Task::Classification => -out
                .iter()
                .zip(target)
                .filter(|(_, t)| **t != 0.0)
                .map(|(p, t)| t * p.max(f64::MIN_POSITIVE).ln())
                .sum::<f64>(),
        }
    }

    /// Mean loss over the given rows.
    pub fn loss(&self, rows: &[(&[f64], &[f64])]) -> f64 {
        let total: f64 = rows
            .iter()
            .map(|(x, t)| self.example_loss(&self.predict(x), t))
            .sum();
        total / rows.len() as f64
    }

    /// Mean loss and its gradient with respect to `params`.
    pub fn loss_and_grad(&self, rows: &[(&[f64], &[f64])]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut total = 0.0;
        let n_layers = self.dims.len() - 1;
        let offsets: Vec<usize> = self
            .dims
            .windows(2)
            .scan(0, |acc, w| {
                let start = *acc;
                *acc += w[1] * (w[0] + 1);
                Some(start)
            })
            .collect();
        for (x, target) in rows {
            let acts = self.forward_all(x);
            let out = &acts[n_layers];
            total += self.example_loss(out, target);
            // dL/dz at the output; identical form for MSE and softmax + CE.
            let mut delta: Vec<f64> = match self.task {
                Task::Regression => {
                    let k = out.len() as f64;
                    out.iter().zip(*target).map(|(o, t)| 2.0 * (o - t) / k).collect()
                }
                Task::Classification => {
                    let mass: f64 = target.iter().sum();
                    out.iter().zip(*target).map(|(p, t)| mass * p - t).collect()
                }
            };
            for l in (0..n_layers).rev() {
                let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
                let off = offsets[l];
                let input = &acts[l];
                for j in 0..n_out {
                    let row = &mut grad[off + j * n_in..off + (j + 1) * n_in];
                    for (g, a) in row.iter_mut().zip(input) {
                        *g += delta[j] * a;
                    }
                    grad[off + n_in * n_out + j] += delta[j];
                }
                if l > 0 {
                    let w = &self.params[off..off + n_in * n_out];
                    let mut prev = vec![0.0; n_in];
                    for j in 0..n_out {
                        for (i, p) in prev.iter_mut().enumerate() {
                            *p += w[j * n_in + i] * delta[j];
                        }
                    }
                    // ReLU derivative, taken as 0 at the kink
                    for (p, a) in prev.iter_mut().zip(input) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        let n = rows.len() as f64;
        for g in &mut grad {
            *g /= n;
        }
        (total / n, grad)
    }

    /// Fraction of rows whose arg-max output matches the arg-max target.
    pub fn accuracy(&self, rows: &[(&[f64], &[f64])]) -> f64 {
        let hits = rows
            .iter()
            .filter(|(x, t)| arg_max(&self.predict(x)) == arg_max(t))
            .count();
        hits as f64 / rows.len() as f64
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

fn arg_max(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Trains on the dataset's training split and records per-epoch training
/// loss, validation loss and (for classification) validation accuracy, all
/// measured after the epoch's updates.
pub fn train_mlp(spec: &MlpSpec, data: &TabularDataset) -> Result<TrainingHistory> {
    spec.validate()?;
    if data.n_inputs != spec.input_dim || data.n_outputs != spec.output_dim {
        return Err(Error::ConfigError(format!(
            "network is {}->{} but dataset '{}' is {}->{}",
            spec.input_dim, spec.output_dim, data.name, data.n_inputs, data.n_outputs
        )));
    }
    let train = data.rows_of(&data.split.train);
    let val = data.rows_of(&data.split.val);
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidInput(format!(
            "dataset '{}' needs non-empty training and validation splits",
            data.name
        )));
    }

    let mut net = Mlp::init(
        spec.layer_dims(),
        spec.task,
        spec.init_scale,
        &mut seed::substream(spec.seed, "mlp-init"),
    );
    let mut order_rng = seed::substream(spec.seed, "mlp-shuffle");
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut train_curve = Vec::with_capacity(spec.epochs);
    let mut val_curve = Vec::with_capacity(spec.epochs);
    let mut acc_curve = Vec::with_capacity(spec.epochs);
    let mut batch = Vec::with_capacity(spec.batch_size);
    for epoch in 0..spec.epochs {
        order.shuffle(&mut order_rng);
        for chunk in order.chunks(spec.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i]));
            let (_, grad) = net.loss_and_grad(&batch);
            for (p, g) in net.params.iter_mut().zip(&grad) {
                *p -= spec.learning_rate * g;
            }
        }
        let tl = net.loss(&train);
        let vl = net.loss(&val);
        if !tl.is_finite() || !vl.is_finite() || net.params.iter().any(|p| !p.is_finite()) {
            let partial = build_history(spec, data, train_curve, val_curve, acc_curve)?;
            return Err(Error::TrainingDiverged {
                epoch,
                partial: Box::new(partial),
            });
        }
        train_curve.push(tl);
        val_curve.push(vl);
        if spec.task == Task::Classification {
            acc_curve.push(net.accuracy(&val));
        }
    }
    build_history(spec, data, train_curve, val_curve, acc_curve)
}

pub fn architecture_name(hidden: &[usize]) -> String {
    hidden.iter().map(usize::to_string).collect::<Vec<_>>().join("+")
}

fn build_history(
    spec: &MlpSpec,
    data: &TabularDataset,
    train: Vec<f64>,
    val: Vec<f64>,
    acc: Vec<f64>,
) -> Result<TrainingHistory> {
    let acc = if spec.task == Task::Classification {
        Some(LossCurve::from_values(acc)?)
    } else {
        None
    };
    let id = format!("{}__{}", data.name, architecture_name(&spec.hidden));
    let loss_kind = match spec.task {
        Task::Regression => "mse",
        Task::Classification => "cross_entropy",
    };
    Ok(TrainingHistory::new(id, LossCurve::from_values(train)?, LossCurve::from_values(val)?, acc)?
        .with_meta("dataset", data.name.clone())
        .with_meta("architecture", architecture_name(&spec.hidden))
        .with_meta("seed", spec.seed.to_string())
        .with_meta("loss_kind", loss_kind))
}
