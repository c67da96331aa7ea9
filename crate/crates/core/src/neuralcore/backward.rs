//! Reverse-mode gradients and the two training objectives.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use super::forward::{forward, gcn_forward, ForwardTrace, SubgraphInput};
use super::weights::{ModelWeights, OUTPUTS};
use crate::error::{Error, Result};

/// Result of a backward pass: parameter gradients and the gradient with
/// respect to every cached layer `H^(0) .. H^(n)`.
#[derive(Debug, Clone)]
pub struct Backprop {
    pub grads: ModelWeights,
    pub d_layers: Vec<Array2<f64>>,
}

fn check_trace(weights: &ModelWeights, trace: &ForwardTrace) -> Result<()> {
    if trace.layers.len() != weights.gcn.len() + 1
        || trace.pre_activations.len() != weights.gcn.len()
    {
        return Err(Error::Shape(format!(
            "trace has {} layers, model has {} GCN layers",
            trace.layers.len(),
            weights.gcn.len()
        )));
    }
    Ok(())
}

fn outer_add(target: &mut Array2<f64>, col: ArrayView1<f64>, row: ArrayView1<f64>) {
    for (i, &c) in col.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        target
            .row_mut(i)
            .iter_mut()
            .zip(row.iter())
            .for_each(|(t, &r)| *t += c * r);
    }
}

/// Head backward: accumulates head gradients and returns `dL/d pooled`.
fn backward_head(
    weights: &ModelWeights,
    trace: &ForwardTrace,
    d_output: &[f64; OUTPUTS],
    grads: Option<&mut ModelWeights>,
) -> Result<Array1<f64>> {
    if trace.head_pre.len() != weights.head.len() || weights.head.is_empty() {
        return Err(Error::Shape(
            "trace was computed without the regression head".into(),
        ));
    }
    let mut grads = grads;
    let mut delta = Array1::from(d_output.to_vec());
    for i in (0..weights.head.len()).rev() {
        let layer = &weights.head[i];
        if let Some(g) = grads.as_deref_mut() {
            outer_add(
                &mut g.head[i].weight,
                delta.view(),
                trace.head_inputs[i].view(),
            );
            g.head[i].bias += &delta;
        }
        let mut dx = layer.weight.t().dot(&delta);
        if i > 0 {
            dx.zip_mut_with(&trace.head_pre[i - 1], |d, &z| {
                if z <= 0.0 {
                    *d = 0.0
                }
            });
        }
        delta = dx;
    }
    Ok(delta)
}

/// `dL/dH^(n)` induced by a gradient on the pooled vector (mean pooling).
fn unpool(d_pooled: &Array1<f64>, nodes: usize) -> Array2<f64> {
    let row = d_pooled / nodes as f64;
    let mut out = Array2::zeros((nodes, row.len()));
    out.rows_mut().into_iter().for_each(|mut r| r.assign(&row));
    out
}

/// Encoder backward from `dL/dH^(n)`; returns gradients for every layer.
fn backward_encoder(
    weights: &ModelWeights,
    trace: &ForwardTrace,
    d_top: Array2<f64>,
    grads: Option<&mut ModelWeights>,
) -> Vec<Array2<f64>> {
    let n_layers = weights.gcn.len();
    let mut grads = grads;
    let mut d_layers = vec![Array2::zeros((0, 0)); n_layers + 1];
    let mut d_h = d_top;
    for l in (0..n_layers).rev() {
        let mut d_pre = d_h.clone();
        d_layers[l + 1] = d_h;
        d_pre.zip_mut_with(&trace.pre_activations[l], |d, &z| {
            if z <= 0.0 {
                *d = 0.0
            }
        });
        let g = trace.adjacency.t().dot(&d_pre);
        if let Some(gr) = grads.as_deref_mut() {
            gr.gcn[l] += &trace.layers[l].t().dot(&g);
        }
        d_h = g.dot(&weights.gcn[l].t());
    }
    if let Some(gr) = grads {
        for (i, kind) in trace.kinds.iter().enumerate() {
            let p = &mut gr.projection[kind.index()];
            let row = d_h.row(i);
            outer_add(
                &mut p.weight,
                row,
                ArrayView1::from(trace.attributes[i].as_slice()),
            );
            p.bias += &row;
        }
    }
    d_layers[0] = d_h;
    d_layers
}

/// Gradients of `d_output . Z_hat` with respect to all parameters and layers.
///
/// Passing a unit vector yields the gradient of one output component, which
/// is what the explanation methods consume.
pub fn backward(
    weights: &ModelWeights,
    trace: &ForwardTrace,
    d_output: &[f64; OUTPUTS],
) -> Result<Backprop> {
    check_trace(weights, trace)?;
    let mut grads = weights.zeros_like();
    let d_pooled = backward_head(weights, trace, d_output, Some(&mut grads))?;
    let d_layers = backward_encoder(
        weights,
        trace,
        unpool(&d_pooled, trace.len()),
        Some(&mut grads),
    );
    Ok(Backprop { grads, d_layers })
}

/// Gradient of output component `v` with respect to `H^(n)` only.
pub fn output_gradient_top(
    weights: &ModelWeights,
    trace: &ForwardTrace,
    v: usize,
) -> Result<Array2<f64>> {
    let mut seed = [0.0; OUTPUTS];
    seed[v] = 1.0;
    let d_pooled = backward_head(weights, trace, &seed, None)?;
    Ok(unpool(&d_pooled, trace.len()))
}

/// Regression objective: mean squared residual over subgraphs and the four
/// outputs, plus `psi` times the squared norm of every weight matrix.
pub fn loss_reg(
    truth: &[[f64; OUTPUTS]],
    predicted: &[[f64; OUTPUTS]],
    weights: &ModelWeights,
    psi: f64,
) -> f64 {
    assert_eq!(truth.len(), predicted.len(), "batch sizes differ");
    let count = (truth.len() * OUTPUTS).max(1) as f64;
    let sse: f64 = truth
        .iter()
        .zip(predicted)
        .flat_map(|(z, zh)| z.iter().zip(zh).map(|(a, b)| (a - b).powi(2)))
        .sum();
    sse / count + psi * weights.l2_norm_sq()
}

/// Reconstructed attributes for every node of a trace.
pub fn reconstruct(weights: &ModelWeights, trace: &ForwardTrace) -> Result<Vec<Array1<f64>>> {
    if !weights.has_reconstruction() {
        return Err(Error::Shape("model has no reconstruction heads".into()));
    }
    let top = trace.top();
    Ok(trace
        .kinds
        .iter()
        .enumerate()
        .map(|(i, k)| weights.reconstruction[k.index()].forward(top.row(i)))
        .collect())
}

/// Self-supervised objective: mean squared reconstruction error over every
/// node attribute in the batch, plus the weight penalty.
pub fn loss_ssl(batch: &[SubgraphInput], weights: &ModelWeights, psi: f64) -> Result<f64> {
    let mut sse = 0.0;
    let mut count = 0usize;
    for input in batch {
        let trace = gcn_forward(input, weights)?;
        for (rec, a) in reconstruct(weights, &trace)?.iter().zip(&input.attributes) {
            sse += rec.iter().zip(a).map(|(r, x)| (r - x).powi(2)).sum::<f64>();
            count += a.len();
        }
    }
    Ok(sse / count.max(1) as f64 + psi * weights.l2_norm_sq())
}

/// `loss_reg` and its gradient for a batch of labelled subgraphs.
pub fn reg_loss_and_grad(
    batch: &[(SubgraphInput, [f64; OUTPUTS])],
    weights: &ModelWeights,
    psi: f64,
) -> Result<(f64, ModelWeights)> {
    let mut grads = weights.zeros_like();
    let count = (batch.len() * OUTPUTS).max(1) as f64;
    let mut sse = 0.0;
    for (input, label) in batch {
        let trace = forward(input, weights)?;
        let mut d_out = [0.0; OUTPUTS];
        for v in 0..OUTPUTS {
            let r = trace.output[v] - label[v];
            sse += r * r;
            d_out[v] = 2.0 * r / count;
        }
        let d_pooled = backward_head(weights, &trace, &d_out, Some(&mut grads))?;
        backward_encoder(
            weights,
            &trace,
            unpool(&d_pooled, trace.len()),
            Some(&mut grads),
        );
    }
    weights.add_l2_gradient(&mut grads, psi);
    Ok((sse / count + psi * weights.l2_norm_sq(), grads))
}

/// `loss_ssl` and its gradient.
pub fn ssl_loss_and_grad(
    batch: &[SubgraphInput],
    weights: &ModelWeights,
    psi: f64,
) -> Result<(f64, ModelWeights)> {
    if !weights.has_reconstruction() {
        return Err(Error::Shape("model has no reconstruction heads".into()));
    }
    let mut grads = weights.zeros_like();
    let count = batch
        .iter()
        .flat_map(|b| b.attributes.iter().map(Vec::len))
        .sum::<usize>()
        .max(1) as f64;
    let mut sse = 0.0;
    for input in batch {
        let trace = gcn_forward(input, weights)?;
        let top = trace.top();
        let mut d_top = Array2::zeros(top.raw_dim());
        for (i, (kind, a)) in trace.kinds.iter().zip(&trace.attributes).enumerate() {
            let head = &weights.reconstruction[kind.index()];
            let rec = head.forward(top.row(i));
            let d_rec: Array1<f64> = rec
                .iter()
                .zip(a)
                .map(|(r, x)| {
                    sse += (r - x).powi(2);
                    2.0 * (r - x) / count
                })
                .collect();
            let g = &mut grads.reconstruction[kind.index()];
            outer_add(&mut g.weight, d_rec.view(), top.row(i));
            g.bias += &d_rec;
            d_top.row_mut(i).assign(&head.weight.t().dot(&d_rec));
        }
        backward_encoder(weights, &trace, d_top, Some(&mut grads));
    }
    weights.add_l2_gradient(&mut grads, psi);
    Ok((sse / count + psi * weights.l2_norm_sq(), grads))
}

/// Average over nodes (rows).
pub(crate) fn column_mean(m: &Array2<f64>) -> Array1<f64> {
    m.mean_axis(Axis(0))
        .unwrap_or_else(|| Array1::zeros(m.ncols()))
}
