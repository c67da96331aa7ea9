//! Projection, GCN encoder, pooled regression head, their gradients, and
//! the pretraining / fine-tuning loops.
//!
//! The encoder applies `H^(l+1) = relu(A_hat H^(l) W^(l))` with
//! `A_hat = D^-1/2 (A + I) D^-1/2`; the head is `MLP(mean_rows(H^(n)))`.

mod backward;
mod checkpoint;
mod forward;
mod metrics;
mod train;
mod weights;

pub(crate) use backward::column_mean;
pub use backward::{
    backward, loss_reg, loss_ssl, output_gradient_top, reconstruct, reg_loss_and_grad,
    ssl_loss_and_grad, Backprop,
};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
};
pub(crate) use forward::relu;
pub use forward::{
    forward, gcn_forward, pool_and_head, predict, project, ForwardTrace, SubgraphInput,
};
pub use metrics::{compute_metrics, Metrics, VariableMetrics};
pub use train::{finetune, pretrain, Adam, TrainOutcome, TrainingData};
pub use weights::{head_widths, Dense, ModelWeights, Tensor, TensorMut, OUTPUTS};

use crate::error::{Error, Result};
use crate::geograph::DEFAULT_HOPS;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Embedding dimension.
    pub d: usize,
    pub n_gcn_layers: usize,
    pub mlp_hidden: Vec<usize>,
    /// Hop radius of context subgraphs.
    pub k: usize,
    /// L2 weight on every weight matrix.
    pub psi: f64,
    pub lr: f64,
    pub epochs_pretrain: usize,
    pub epochs_finetune: usize,
    /// Subgraphs per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: 32,
            n_gcn_layers: 2,
            mlp_hidden: vec![32],
            k: DEFAULT_HOPS,
            psi: 1e-4,
            lr: 1e-3,
            epochs_pretrain: 3,
            epochs_finetune: 3,
            batch_size: 32,
            seed: 7,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.d == 0 {
            return fail("d must be at least 1");
        }
        if !(self.psi >= 0.0 && self.psi.is_finite()) {
            return fail("psi must be finite and >= 0");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail("lr must be positive");
        }
        if self.k == 0 {
            return fail("k must be at least 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if self.mlp_hidden.contains(&0) {
            return fail("hidden widths must be positive");
        }
        Ok(())
    }
}
