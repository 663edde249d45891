//! ADAM and the mini-batch training loop.

use std::io::Write;

use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{Mode, Network};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            epochs: 20,
            batch_size: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be finite and >= 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        Ok(())
    }
}

/// First and second moment estimates for each parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(tensor_sizes: impl IntoIterator<Item = usize>) -> Self {
        let sizes: Vec<usize> = tensor_sizes.into_iter().collect();
        Self {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn for_network(net: &Network) -> Self {
        Self::new(net.tensors().iter().map(|t| t.len()))
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, tensor: usize) -> &[f64] {
        &self.m[tensor]
    }

    pub fn second_moment(&self, tensor: usize) -> &[f64] {
        &self.v[tensor]
    }
}

/// One bias-corrected ADAM update of every tensor in `params`.
///
/// `names` labels the tensors for diagnostics. Gradients are checked for
/// finiteness before anything is modified.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    names: &[String],
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} parameter tensors, {} gradients, {} optimizer slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.m[i].len() {
            return Err(Error::DimensionMismatch(format!(
                "tensor {i}: {} parameters, {} gradients, {} optimizer entries",
                p.len(),
                g.len(),
                state.m[i].len()
            )));
        }
        if let Some(index) = g.iter().position(|v| !v.is_finite()) {
            let tensor = names.get(i).cloned().unwrap_or_else(|| format!("tensor{i}"));
            return Err(Error::NonFiniteGradient { tensor, index });
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for j in 0..p.len() {
            let gj = g[j];
            m[j] = b1 * m[j] + (1.0 - b1) * gj;
            v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            p[j] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// Mean training-mode loss over all samples of the epoch.
    pub mean_loss: f64,
    /// Fraction of samples whose training-mode prediction was correct
    /// while the epoch ran.
    pub train_accuracy: f64,
}

/// Trains with a generator seeded from `cfg.seed`.
pub fn train(net: &mut Network, data: &Dataset, cfg: &TrainConfig) -> Result<Vec<EpochStats>> {
    let mut rng = rng::seeded(cfg.seed);
    train_with_rng(net, data, cfg, &mut rng)
}

/// Per epoch: shuffle, split into batches of `batch_size` (the last may be
/// short), and take one ADAM step on each batch's mean gradient. `rng`
/// drives both the shuffles and the dropout masks.
pub fn train_with_rng(
    net: &mut Network,
    data: &Dataset,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    data.check_compatible(net)?;

    let names = net.tensor_names();
    let mut state = AdamState::for_network(net);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (batch_no, idx) in order.chunks(cfg.batch_size).enumerate() {
            let (x, labels) = data.batch(idx);
            let (loss, grads, hits) = net.batch_gradient(x.view(), &labels, &mut Mode::Train(rng))?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: batch_no,
                    loss,
                });
            }
            loss_sum += loss * idx.len() as f64;
            correct += hits;
            let g = grads.tensors();
            adam_step(&mut net.tensors_mut(), &g, &names, &mut state, cfg)?;
        }
        history.push(EpochStats {
            epoch,
            mean_loss: loss_sum / data.len() as f64,
            train_accuracy: correct as f64 / data.len() as f64,
        });
    }
    Ok(history)
}

/// Fraction of samples classified correctly in evaluation mode.
pub fn evaluate(net: &Network, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    data.check_compatible(net)?;
    const CHUNK: usize = 256;
    let all: Vec<usize> = (0..data.len()).collect();
    let mut correct = 0;
    for idx in all.chunks(CHUNK) {
        let (x, labels) = data.batch(idx);
        let pred = net.predict_batch(x.view())?;
        correct += pred.iter().zip(&labels).filter(|(p, l)| p == l).count();
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Writes `epoch,mean_loss,train_accuracy` rows.
pub fn write_history_csv(history: &[EpochStats], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "epoch,mean_loss,train_accuracy")?;
    for h in history {
        writeln!(out, "{},{},{}", h.epoch, h.mean_loss, h.train_accuracy)?;
    }
    Ok(())
}
