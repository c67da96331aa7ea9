use ndarray::{Array1, Array2, Axis};

use super::weights::{ModelWeights, OUTPUTS};
use crate::error::{Error, Result};
use crate::geograph::NodeKind;

/// Model-ready view of a context subgraph: node kinds, standardized
/// attributes, and the normalized adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphInput {
    pub kinds: Vec<NodeKind>,
    pub attributes: Vec<Vec<f64>>,
    pub adjacency: Array2<f64>,
}

impl SubgraphInput {
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.kinds.len();
        if n == 0 {
            return Err(Error::Empty("subgraph"));
        }
        if self.attributes.len() != n || self.adjacency.dim() != (n, n) {
            return Err(Error::Shape(format!(
                "{n} kinds, {} attribute rows, adjacency {:?}",
                self.attributes.len(),
                self.adjacency.dim()
            )));
        }
        for (kind, a) in self.kinds.iter().zip(&self.attributes) {
            if a.len() != kind.variables().len() {
                return Err(Error::AttributeCount {
                    kind: *kind,
                    expected: kind.variables().len(),
                    got: a.len(),
                });
            }
        }
        Ok(())
    }
}

/// Everything the forward pass computed, enough for backprop and LRP.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub kinds: Vec<NodeKind>,
    pub attributes: Vec<Vec<f64>>,
    pub adjacency: Array2<f64>,
    /// `H^(0) .. H^(n)`; `layers[0]` holds the projected inputs.
    pub layers: Vec<Array2<f64>>,
    /// `A_hat H^(l) W^(l)`, which the rectifier turns into `layers[l + 1]`.
    pub pre_activations: Vec<Array2<f64>>,
    pub pooled: Array1<f64>,
    /// Input of each head layer; `head_inputs[0]` is the pooled vector.
    pub head_inputs: Vec<Array1<f64>>,
    /// Affine output of each head layer; the last one is the prediction.
    pub head_pre: Vec<Array1<f64>>,
    pub output: [f64; OUTPUTS],
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    /// Final node representations `H^(n)`.
    pub fn top(&self) -> &Array2<f64> {
        self.layers.last().expect("at least the projection layer")
    }
}

pub(crate) fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Linear per-kind projection `h = P_kind a + b_kind`.
pub fn project(kind: NodeKind, attributes: &[f64], weights: &ModelWeights) -> Result<Array1<f64>> {
    let p = weights
        .projection
        .get(kind.index())
        .ok_or_else(|| Error::Shape(format!("no projection for {kind}")))?;
    if attributes.len() != p.inputs() {
        return Err(Error::AttributeCount {
            kind,
            expected: p.inputs(),
            got: attributes.len(),
        });
    }
    Ok(p.forward(ndarray::ArrayView1::from(attributes)))
}

/// Projection plus the GCN encoder; the head part of the trace is left empty.
pub fn gcn_forward(input: &SubgraphInput, weights: &ModelWeights) -> Result<ForwardTrace> {
    input.validate()?;
    let n = input.len();
    let d = weights.embedding_dim();
    let mut h0 = Array2::zeros((n, d));
    for (i, (kind, a)) in input.kinds.iter().zip(&input.attributes).enumerate() {
        h0.row_mut(i).assign(&project(*kind, a, weights)?);
    }

    let mut layers = vec![h0];
    let mut pre_activations = Vec::with_capacity(weights.gcn.len());
    for w in &weights.gcn {
        let h = layers.last().unwrap();
        let pre = input.adjacency.dot(&h.dot(w));
        layers.push(pre.mapv(relu));
        pre_activations.push(pre);
    }

    Ok(ForwardTrace {
        kinds: input.kinds.clone(),
        attributes: input.attributes.clone(),
        adjacency: input.adjacency.clone(),
        layers,
        pre_activations,
        pooled: Array1::zeros(0),
        head_inputs: Vec::new(),
        head_pre: Vec::new(),
        output: [0.0; OUTPUTS],
    })
}

/// Mean pooling over nodes followed by the regression head; fills the trace.
pub fn pool_and_head(trace: &mut ForwardTrace, weights: &ModelWeights) -> Result<[f64; OUTPUTS]> {
    if weights.head.is_empty() {
        return Err(Error::Shape("model has no regression head".into()));
    }
    let pooled = trace
        .top()
        .mean_axis(Axis(0))
        .ok_or(Error::Empty("subgraph"))?;
    let mut head_inputs = Vec::with_capacity(weights.head.len());
    let mut head_pre = Vec::with_capacity(weights.head.len());
    let mut x = pooled.clone();
    let last = weights.head.len() - 1;
    for (i, layer) in weights.head.iter().enumerate() {
        if layer.inputs() != x.len() {
            return Err(Error::Shape(format!(
                "head layer {i} expects {} inputs, got {}",
                layer.inputs(),
                x.len()
            )));
        }
        let z = layer.forward(x.view());
        head_inputs.push(x);
        x = if i == last { z.clone() } else { z.mapv(relu) };
        head_pre.push(z);
    }
    let output: [f64; OUTPUTS] = x
        .as_slice()
        .and_then(|s| s.try_into().ok())
        .ok_or_else(|| Error::Shape(format!("head produces {} outputs", x.len())))?;
    trace.pooled = pooled;
    trace.head_inputs = head_inputs;
    trace.head_pre = head_pre;
    trace.output = output;
    Ok(output)
}

/// Full forward pass with every intermediate cached.
pub fn forward(input: &SubgraphInput, weights: &ModelWeights) -> Result<ForwardTrace> {
    let mut trace = gcn_forward(input, weights)?;
    pool_and_head(&mut trace, weights)?;
    Ok(trace)
}

/// Estimated (U, V, T, Q) at the subgraph's center, in standardized units.
pub fn predict(weights: &ModelWeights, input: &SubgraphInput) -> Result<[f64; OUTPUTS]> {
    forward(input, weights).map(|t| t.output)
}
