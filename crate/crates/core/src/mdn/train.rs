use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::net::{FeedforwardNet, Targets};
use crate::error::{Error, Result};
use crate::par::{stream, Exec};

/// Samples per gradient work item. Chunk sums are combined in index order so
/// the result is independent of the thread count.
const GRAD_CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Minibatch size; `None` uses one hundredth of the training set.
    pub batch_size: Option<usize>,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of final epochs over which the parameter iterates are averaged
    /// into the returned network. Zero keeps the last iterate.
    pub average_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.01, batch_size: None, epochs: 100, seed: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8, average_epochs: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.batch_size == Some(0) || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be positive".into()));
        }
        if self.average_epochs > self.epochs {
            return Err(Error::Config(format!("cannot average over {} of {} epochs", self.average_epochs, self.epochs)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::Config("Adam decay rates must lie in [0, 1) and eps be positive".into()));
        }
        Ok(())
    }

    pub fn resolved_batch(&self, n: usize) -> usize {
        self.batch_size.unwrap_or((n / 100).max(1)).min(n)
    }
}

/// Adam optimizer state.
#[derive(Clone, Debug)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr: cfg.learning_rate, beta1: cfg.beta1, beta2: cfg.beta2, eps: cfg.eps }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Outcome of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of every epoch.
    pub loss_trace: Vec<f64>,
}

pub fn train(net: &mut FeedforwardNet, inputs: &[Vec<f64>], targets: Targets<'_>, cfg: &TrainConfig) -> Result<TrainReport> {
    train_with(net, inputs, targets, cfg, Exec::default())
}

/// Minibatch Adam on the mean loss. Each epoch shuffles with its own random
/// stream derived from the seed. With `average_epochs > 0` the returned
/// parameters are the mean of the iterates after every step of the final
/// epochs.
pub fn train_with(
    net: &mut FeedforwardNet,
    inputs: &[Vec<f64>],
    targets: Targets<'_>,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<TrainReport> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    net.loss(&inputs[..1], match targets {
        Targets::Labels(l) => Targets::Labels(&l[..1]),
        Targets::Params(p) => Targets::Params(&p[..1]),
    })?;
    if inputs.len() != targets.len() {
        return Err(Error::Input("inputs and targets differ in length".into()));
    }
    let n = inputs.len();
    let batch = cfg.resolved_batch(n);
    let mut adam = Adam::new(net.n_params(), cfg);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let average_from = cfg.epochs - cfg.average_epochs;
    let mut average = vec![0.0; net.n_params()];
    let mut n_averaged = 0.0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut stream(cfg.seed, 1 + epoch as u64));
        let mut epoch_loss = 0.0;
        for (b, idx) in order.chunks(batch).enumerate() {
            let chunks: Vec<&[usize]> = idx.chunks(GRAD_CHUNK).collect();
            let frozen = &*net;
            let parts = exec.map(chunks.len(), |c| frozen.accumulate(inputs, targets, chunks[c]));
            let mut grad = vec![0.0; net.n_params()];
            let mut loss = 0.0;
            for (l, g) in parts {
                loss += l;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            let scale = 1.0 / idx.len() as f64;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDivergence {
                    epoch,
                    batch: b,
                    loss: loss * scale,
                    param_norm: net.params.iter().map(|p| p * p).sum::<f64>().sqrt(),
                });
            }
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut net.params, &grad);
            if epoch >= average_from {
                n_averaged += 1.0;
                average.iter_mut().zip(&net.params).for_each(|(a, p)| *a += (p - *a) / n_averaged);
            }
            epoch_loss += loss;
        }
        let mean = epoch_loss / n as f64;
        log::debug!("epoch {epoch}: loss {mean:.6}");
        trace.push(mean);
    }
    if n_averaged > 0.0 {
        net.params = average;
    }
    Ok(TrainReport { loss_trace: trace })
}
