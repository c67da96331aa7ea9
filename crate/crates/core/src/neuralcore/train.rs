use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::backward::{reg_loss_and_grad, ssl_loss_and_grad};
use super::forward::SubgraphInput;
use super::weights::{ModelWeights, OUTPUTS};
use super::ModelConfig;
use crate::error::{Error, Result};

const PRETRAIN_STREAM: u64 = 10;
const FINETUNE_STREAM: u64 = 11;

/// Indexed access to training examples, assembled on demand.
pub trait TrainingData {
    fn len(&self) -> usize;

    fn input(&self, index: usize) -> SubgraphInput;

    fn label(&self, index: usize) -> [f64; OUTPUTS];

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl TrainingData for [(SubgraphInput, [f64; OUTPUTS])] {
    fn len(&self) -> usize {
        <[_]>::len(self)
    }

    fn input(&self, index: usize) -> SubgraphInput {
        self[index].0.clone()
    }

    fn label(&self, index: usize) -> [f64; OUTPUTS] {
        self[index].1
    }
}

/// Adaptive-moment optimizer state over every parameter tensor.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(weights: &ModelWeights, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = weights
            .tensors()
            .iter()
            .map(|t| vec![0.0; t.data.len()])
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn update(&mut self, weights: &mut ModelWeights, grads: &ModelWeights) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let tensors = weights.tensors_mut();
        let grad_tensors = grads.tensors();
        for (k, (w, g)) in tensors.into_iter().zip(grad_tensors).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..w.data.len() {
                let gi = g.data[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                w.data[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: ModelWeights,
    /// Mean minibatch loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

fn epoch_order(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

fn check_loss(epoch: usize, loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { epoch, loss })
    }
}

/// Node-attribute reconstruction pretraining of the projection and encoder.
pub fn pretrain(data: &(impl TrainingData + ?Sized), config: &ModelConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let mut weights = ModelWeights::init(config);
    let mut adam = Adam::new(&weights, config.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(PRETRAIN_STREAM);
    let mut epoch_losses = Vec::with_capacity(config.epochs_pretrain);
    for epoch in 0..config.epochs_pretrain {
        let order = epoch_order(data.len(), &mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<SubgraphInput> = chunk.iter().map(|&i| data.input(i)).collect();
            let (loss, grads) = ssl_loss_and_grad(&batch, &weights, config.psi)?;
            check_loss(epoch, loss)?;
            adam.update(&mut weights, &grads);
            total += loss;
            batches += 1;
        }
        epoch_losses.push(total / batches as f64);
    }
    Ok(TrainOutcome {
        weights,
        epoch_losses,
    })
}

/// Regression training. With `encoder`, the projection and GCN weights start
/// from it; otherwise from the seeded initialization (vanilla GCN). The head
/// always starts fresh, and reconstruction heads are dropped.
pub fn finetune(
    data: &(impl TrainingData + ?Sized),
    encoder: Option<&ModelWeights>,
    config: &ModelConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let mut weights = ModelWeights::init(config);
    weights.reconstruction.clear();
    if let Some(enc) = encoder {
        let fresh = ModelWeights::zeros(config, false);
        if enc.projection.len() != fresh.projection.len()
            || enc.gcn.len() != fresh.gcn.len()
            || enc.embedding_dim() != config.d
        {
            return Err(Error::Shape(
                "encoder does not match the model config".into(),
            ));
        }
        weights.projection = enc.projection.clone();
        weights.gcn = enc.gcn.clone();
    }
    let mut adam = Adam::new(&weights, config.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(FINETUNE_STREAM);
    let mut epoch_losses = Vec::with_capacity(config.epochs_finetune);
    for epoch in 0..config.epochs_finetune {
        let order = epoch_order(data.len(), &mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(SubgraphInput, [f64; OUTPUTS])> = chunk
                .iter()
                .map(|&i| (data.input(i), data.label(i)))
                .collect();
            let (loss, grads) = reg_loss_and_grad(&batch, &weights, config.psi)?;
            check_loss(epoch, loss)?;
            adam.update(&mut weights, &grads);
            total += loss;
            batches += 1;
        }
        epoch_losses.push(total / batches as f64);
    }
    Ok(TrainOutcome {
        weights,
        epoch_losses,
    })
}
