use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;
use crate::geograph::NodeKind;

pub const OUTPUTS: usize = 4;

/// Affine map `y = W x + b` with `W` stored as (out x in).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    fn glorot(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: glorot(outputs, inputs, rng),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.weight.dot(&x) + &self.bias
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }
}

// Owned arrays built in this module are always in standard layout.
fn flat(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..limit))
}

/// Every learnable parameter of the model.
///
/// The same structure doubles as a gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    /// Per-kind projection to the embedding, indexed by [`NodeKind::index`].
    pub projection: Vec<Dense>,
    /// GCN layer weights (d x d), applied as `A_hat H W`.
    pub gcn: Vec<Array2<f64>>,
    /// Per-kind attribute decoders used in pretraining; empty otherwise.
    pub reconstruction: Vec<Dense>,
    /// Regression head: hidden layers with rectifiers, then a linear map to (U, V, T, Q).
    pub head: Vec<Dense>,
}

/// Borrowed view of one named parameter tensor.
#[derive(Debug)]
pub struct Tensor<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
    /// Weight matrices are L2-regularized, bias vectors are not.
    pub regularized: bool,
}

#[derive(Debug)]
pub struct TensorMut<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a mut [f64],
    pub regularized: bool,
}

impl ModelWeights {
    /// Random initialization, a pure function of the config (seed included).
    pub fn init(config: &ModelConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.d;
        let projection = NodeKind::ALL
            .iter()
            .map(|k| Dense::glorot(k.variables().len(), d, &mut rng))
            .collect();
        let gcn = (0..config.n_gcn_layers)
            .map(|_| glorot(d, d, &mut rng))
            .collect();
        let reconstruction = NodeKind::ALL
            .iter()
            .map(|k| Dense::glorot(d, k.variables().len(), &mut rng))
            .collect();
        // Separate stream so the head does not depend on encoder sizes.
        rng.set_stream(1);
        let head = head_widths(config)
            .windows(2)
            .map(|w| Dense::glorot(w[0], w[1], &mut rng))
            .collect();
        Self {
            projection,
            gcn,
            reconstruction,
            head,
        }
    }

    /// All-zero weights with the shapes implied by `config`.
    pub fn zeros(config: &ModelConfig, with_reconstruction: bool) -> Self {
        let d = config.d;
        Self {
            projection: NodeKind::ALL
                .iter()
                .map(|k| Dense::zeros(k.variables().len(), d))
                .collect(),
            gcn: (0..config.n_gcn_layers)
                .map(|_| Array2::zeros((d, d)))
                .collect(),
            reconstruction: if with_reconstruction {
                NodeKind::ALL
                    .iter()
                    .map(|k| Dense::zeros(d, k.variables().len()))
                    .collect()
            } else {
                Vec::new()
            },
            head: head_widths(config)
                .windows(2)
                .map(|w| Dense::zeros(w[0], w[1]))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.scale(0.0);
        z
    }

    pub fn embedding_dim(&self) -> usize {
        self.projection[0].outputs()
    }

    pub fn has_reconstruction(&self) -> bool {
        !self.reconstruction.is_empty()
    }

    pub fn tensors(&self) -> Vec<Tensor<'_>> {
        let mut out = Vec::new();
        for (kind, p) in NodeKind::ALL.iter().zip(&self.projection) {
            out.push(Tensor {
                name: format!("proj.{kind}.w"),
                shape: p.weight.shape().to_vec(),
                data: flat(&p.weight),
                regularized: true,
            });
            out.push(Tensor {
                name: format!("proj.{kind}.b"),
                shape: p.bias.shape().to_vec(),
                data: p.bias.as_slice().expect("standard layout"),
                regularized: false,
            });
        }
        for (l, w) in self.gcn.iter().enumerate() {
            out.push(Tensor {
                name: format!("gcn.{l}.w"),
                shape: w.shape().to_vec(),
                data: flat(w),
                regularized: true,
            });
        }
        for (kind, r) in NodeKind::ALL.iter().zip(&self.reconstruction) {
            out.push(Tensor {
                name: format!("recon.{kind}.w"),
                shape: r.weight.shape().to_vec(),
                data: flat(&r.weight),
                regularized: true,
            });
            out.push(Tensor {
                name: format!("recon.{kind}.b"),
                shape: r.bias.shape().to_vec(),
                data: r.bias.as_slice().expect("standard layout"),
                regularized: false,
            });
        }
        for (i, h) in self.head.iter().enumerate() {
            out.push(Tensor {
                name: format!("head.{i}.w"),
                shape: h.weight.shape().to_vec(),
                data: flat(&h.weight),
                regularized: true,
            });
            out.push(Tensor {
                name: format!("head.{i}.b"),
                shape: h.bias.shape().to_vec(),
                data: h.bias.as_slice().expect("standard layout"),
                regularized: false,
            });
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::new();
        for (kind, p) in NodeKind::ALL.iter().zip(&mut self.projection) {
            out.push(TensorMut {
                name: format!("proj.{kind}.w"),
                shape: p.weight.shape().to_vec(),
                data: p.weight.as_slice_mut().expect("standard layout"),
                regularized: true,
            });
            out.push(TensorMut {
                name: format!("proj.{kind}.b"),
                shape: p.bias.shape().to_vec(),
                data: p.bias.as_slice_mut().expect("standard layout"),
                regularized: false,
            });
        }
        for (l, w) in self.gcn.iter_mut().enumerate() {
            out.push(TensorMut {
                name: format!("gcn.{l}.w"),
                shape: w.shape().to_vec(),
                data: w.as_slice_mut().expect("standard layout"),
                regularized: true,
            });
        }
        for (kind, r) in NodeKind::ALL.iter().zip(&mut self.reconstruction) {
            out.push(TensorMut {
                name: format!("recon.{kind}.w"),
                shape: r.weight.shape().to_vec(),
                data: r.weight.as_slice_mut().expect("standard layout"),
                regularized: true,
            });
            out.push(TensorMut {
                name: format!("recon.{kind}.b"),
                shape: r.bias.shape().to_vec(),
                data: r.bias.as_slice_mut().expect("standard layout"),
                regularized: false,
            });
        }
        for (i, h) in self.head.iter_mut().enumerate() {
            out.push(TensorMut {
                name: format!("head.{i}.w"),
                shape: h.weight.shape().to_vec(),
                data: h.weight.as_slice_mut().expect("standard layout"),
                regularized: true,
            });
            out.push(TensorMut {
                name: format!("head.{i}.b"),
                shape: h.bias.shape().to_vec(),
                data: h.bias.as_slice_mut().expect("standard layout"),
                regularized: false,
            });
        }
        out
    }

    /// Sum of squared entries of every weight matrix (biases excluded).
    pub fn l2_norm_sq(&self) -> f64 {
        self.tensors()
            .iter()
            .filter(|t| t.regularized)
            .flat_map(|t| t.data.iter())
            .map(|w| w * w)
            .sum()
    }

    /// Adds `2 psi W` to every matrix of `grads`.
    pub fn add_l2_gradient(&self, grads: &mut ModelWeights, psi: f64) {
        if psi == 0.0 {
            return;
        }
        for (w, g) in self.tensors().iter().zip(grads.tensors_mut()) {
            if w.regularized {
                for (gi, wi) in g.data.iter_mut().zip(w.data) {
                    *gi += 2.0 * psi * wi;
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// `self += alpha * other`; shapes must agree.
    pub fn add_scaled(&mut self, other: &ModelWeights, alpha: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            debug_assert_eq!(a.name, b.name);
            for (x, y) in a.data.iter_mut().zip(b.data) {
                *x += alpha * y;
            }
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.data.iter().all(|x| x.is_finite()))
    }
}

/// Layer widths of the regression head, from the embedding to the outputs.
pub fn head_widths(config: &ModelConfig) -> Vec<usize> {
    std::iter::once(config.d)
        .chain(config.mlp_hidden.iter().copied())
        .chain(std::iter::once(OUTPUTS))
        .collect()
}
