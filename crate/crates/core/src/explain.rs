//! Node sensitivities from saliency, Grad-CAM and layer-wise relevance
//! propagation, and their aggregation into observation impact.
//!
//! Every method yields one nonnegative score per subgraph node. Gradients
//! and relevances are computed separately for each of the four outputs
//! (U, V, T, Q) and summed. Within one output, saliency averages the
//! rectified gradient over feature channels, Grad-CAM rectifies the
//! channel-weighted activation, and LRP sums relevance over the input
//! embedding channels and takes its magnitude.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};

use crate::context::Corpus;
use crate::error::{Error, Result};
use crate::geograph::{NodeId, NodeKind};
use crate::neuralcore::{
    column_mean, forward, output_gradient_top, relu, ForwardTrace, ModelWeights, SubgraphInput,
    OUTPUTS,
};
use crate::parallel::map_indexed;

pub const DEFAULT_LRP_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExplanationMethod {
    Sa,
    GradCam,
    Lrp,
}

impl ExplanationMethod {
    pub const ALL: [ExplanationMethod; 3] = [
        ExplanationMethod::Sa,
        ExplanationMethod::GradCam,
        ExplanationMethod::Lrp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExplanationMethod::Sa => "SA",
            ExplanationMethod::GradCam => "Grad-CAM",
            ExplanationMethod::Lrp => "LRP",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            ExplanationMethod::Sa => "sa",
            ExplanationMethod::GradCam => "gradcam",
            ExplanationMethod::Lrp => "lrp",
        }
    }
}

impl fmt::Display for ExplanationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExplanationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        ExplanationMethod::ALL
            .into_iter()
            .find(|m| m.key() == lower || m.name().to_ascii_lowercase() == lower)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown explanation method {s:?}")))
    }
}

/// Scores of every node of one context subgraph.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSensitivity {
    pub sample: usize,
    pub method: ExplanationMethod,
    pub node_ids: Vec<NodeId>,
    pub scores: Vec<f64>,
}

/// Rectified output gradient with respect to `H^(n)`, averaged over channels.
pub fn saliency_sa(weights: &ModelWeights, input: &SubgraphInput) -> Result<Vec<f64>> {
    let trace = forward(input, weights)?;
    saliency_from_trace(weights, &trace)
}

fn saliency_from_trace(weights: &ModelWeights, trace: &ForwardTrace) -> Result<Vec<f64>> {
    let mut scores = vec![0.0; trace.len()];
    for v in 0..OUTPUTS {
        let grad = output_gradient_top(weights, trace, v)?;
        for (s, row) in scores.iter_mut().zip(grad.rows()) {
            *s += row.iter().map(|&g| relu(g)).sum::<f64>() / row.len() as f64;
        }
    }
    Ok(scores)
}

/// Channel weights are node-averaged output gradients; a node's score is the
/// rectified weighted sum of its final-layer channels.
pub fn gradcam(weights: &ModelWeights, input: &SubgraphInput) -> Result<Vec<f64>> {
    let trace = forward(input, weights)?;
    gradcam_from_trace(weights, &trace)
}

fn gradcam_from_trace(weights: &ModelWeights, trace: &ForwardTrace) -> Result<Vec<f64>> {
    let top = trace.top();
    let mut scores = vec![0.0; trace.len()];
    for v in 0..OUTPUTS {
        let alpha = column_mean(&output_gradient_top(weights, trace, v)?);
        let cam = top.dot(&alpha);
        for (s, c) in scores.iter_mut().zip(cam.iter()) {
            *s += relu(*c);
        }
    }
    Ok(scores)
}

fn stabilize(z: f64, eps: f64) -> f64 {
    if z >= 0.0 {
        z + eps
    } else {
        z - eps
    }
}

fn ratio(r: f64, z: f64, eps: f64) -> f64 {
    let denom = stabilize(z, eps);
    if denom == 0.0 {
        0.0
    } else {
        r / denom
    }
}

/// Signed relevance of every `H^(0)` entry for output `v`, starting from
/// `R = Z_hat_v` at the output.
///
/// Each linear map `z_b = sum_a x_a w_ab` redistributes
/// `R_a = sum_b x_a w_ab / (z_b + eps sign z_b) R_b`; biases do not enter the
/// denominator. Mean pooling splits relevance equally over nodes, and the
/// top rectifier keeps only active entries. A GCN layer is treated as one
/// linear map with weights `A_hat_ij W_ab`.
pub fn lrp_relevance(
    weights: &ModelWeights,
    trace: &ForwardTrace,
    v: usize,
    eps: f64,
) -> Result<Array2<f64>> {
    if trace.head_pre.len() != weights.head.len() || weights.head.is_empty() {
        return Err(Error::Shape(
            "trace was computed without the regression head".into(),
        ));
    }
    let mut relevance = Array1::zeros(OUTPUTS);
    relevance[v] = trace.output[v];

    for (i, layer) in weights.head.iter().enumerate().rev() {
        let x = &trace.head_inputs[i];
        let z = layer.weight.dot(x);
        let s: Array1<f64> = relevance
            .iter()
            .zip(z.iter())
            .map(|(&r, &zb)| ratio(r, zb, eps))
            .collect();
        relevance = x * &layer.weight.t().dot(&s);
    }

    let n = trace.len();
    let top = trace.top();
    let mut r_top = Array2::zeros(top.raw_dim());
    for (mut row, h) in r_top.rows_mut().into_iter().zip(top.rows()) {
        for ((r, &rp), &a) in row.iter_mut().zip(relevance.iter()).zip(h.iter()) {
            if a > 0.0 || weights.gcn.is_empty() {
                *r = rp / n as f64;
            }
        }
    }

    let mut r_layer = r_top;
    for l in (0..weights.gcn.len()).rev() {
        let pre = &trace.pre_activations[l];
        let mut s = r_layer;
        s.zip_mut_with(pre, |r, &z| *r = ratio(*r, z, eps));
        let back = trace.adjacency.t().dot(&s).dot(&weights.gcn[l].t());
        r_layer = &trace.layers[l] * &back;
    }
    Ok(r_layer)
}

/// Per-node LRP relevance summed over channels, one vector per output.
pub fn lrp_node_relevance(
    weights: &ModelWeights,
    input: &SubgraphInput,
    eps: f64,
) -> Result<[Vec<f64>; OUTPUTS]> {
    let trace = forward(input, weights)?;
    let mut out: [Vec<f64>; OUTPUTS] = Default::default();
    for (v, slot) in out.iter_mut().enumerate() {
        let r = lrp_relevance(weights, &trace, v, eps)?;
        *slot = r.rows().into_iter().map(|row| row.sum()).collect();
    }
    Ok(out)
}

/// Magnitude of each node's relevance, summed over outputs.
pub fn lrp(weights: &ModelWeights, input: &SubgraphInput) -> Result<Vec<f64>> {
    let trace = forward(input, weights)?;
    lrp_from_trace(weights, &trace, DEFAULT_LRP_EPSILON)
}

fn lrp_from_trace(weights: &ModelWeights, trace: &ForwardTrace, eps: f64) -> Result<Vec<f64>> {
    let mut scores = vec![0.0; trace.len()];
    for v in 0..OUTPUTS {
        let r = lrp_relevance(weights, trace, v, eps)?;
        for (s, row) in scores.iter_mut().zip(r.rows()) {
            *s += row.sum().abs();
        }
    }
    Ok(scores)
}

pub fn method_scores(
    method: ExplanationMethod,
    weights: &ModelWeights,
    input: &SubgraphInput,
) -> Result<Vec<f64>> {
    let trace = forward(input, weights)?;
    match method {
        ExplanationMethod::Sa => saliency_from_trace(weights, &trace),
        ExplanationMethod::GradCam => gradcam_from_trace(weights, &trace),
        ExplanationMethod::Lrp => lrp_from_trace(weights, &trace, DEFAULT_LRP_EPSILON),
    }
}

/// Scores of sample `index` of a corpus.
pub fn node_sensitivity(
    method: ExplanationMethod,
    weights: &ModelWeights,
    corpus: &Corpus,
    index: usize,
) -> Result<NodeSensitivity> {
    let input = corpus.input_occluded(index, &[])?;
    Ok(NodeSensitivity {
        sample: index,
        method,
        node_ids: corpus.samples[index].subgraph.node_ids.clone(),
        scores: method_scores(method, weights, &input)?,
    })
}

/// Explains every sample; results are in sample order.
pub fn explain_corpus(
    method: ExplanationMethod,
    weights: &ModelWeights,
    corpus: &Corpus,
) -> Result<Vec<NodeSensitivity>> {
    map_indexed(corpus.samples.len(), |i| {
        node_sensitivity(method, weights, corpus, i)
    })
    .into_iter()
    .collect()
}

/// Mean score of each node over the subgraphs that contain it. Nodes of
/// `universe` that appear in no subgraph get 0.
pub fn aggregate_impact<'a>(
    sensitivities: impl IntoIterator<Item = &'a NodeSensitivity>,
    universe: impl IntoIterator<Item = NodeId>,
) -> BTreeMap<NodeId, f64> {
    let mut acc: BTreeMap<NodeId, (f64, usize)> =
        universe.into_iter().map(|id| (id, (0.0, 0))).collect();
    for s in sensitivities {
        for (id, score) in s.node_ids.iter().zip(&s.scores) {
            let e = acc.entry(*id).or_insert((0.0, 0));
            e.0 += score;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(id, (sum, n))| (id, if n == 0 { 0.0 } else { sum / n as f64 }))
        .collect()
}

/// Mean impact per observation kind, in [`NodeKind::OBSERVATIONS`] order.
/// Kinds with no nodes get 0.
pub fn impact_by_type(
    impact: &BTreeMap<NodeId, f64>,
    kinds: impl IntoIterator<Item = (NodeId, NodeKind)>,
) -> Vec<(NodeKind, f64)> {
    let mut acc: BTreeMap<NodeKind, (f64, usize)> = BTreeMap::new();
    for (id, kind) in kinds {
        if !kind.is_observation() {
            continue;
        }
        let e = acc.entry(kind).or_insert((0.0, 0));
        e.0 += impact.get(&id).copied().unwrap_or(0.0);
        e.1 += 1;
    }
    NodeKind::OBSERVATIONS
        .iter()
        .map(|&k| {
            let (sum, n) = acc.get(&k).copied().unwrap_or((0.0, 0));
            (k, if n == 0 { 0.0 } else { sum / n as f64 })
        })
        .collect()
}

/// `impact_by_type` restricted to each time step's subgraphs and nodes.
pub fn impact_timeseries(
    corpus: &Corpus,
    sensitivities: &[NodeSensitivity],
) -> Vec<(i64, Vec<(NodeKind, f64)>)> {
    corpus
        .steps
        .iter()
        .enumerate()
        .map(|(si, step)| {
            let subset = sensitivities
                .iter()
                .filter(|s| corpus.samples[s.sample].step == si);
            let nodes = step.graph.nodes();
            let impact = aggregate_impact(subset, nodes.iter().map(|n| n.id));
            (
                step.time,
                impact_by_type(&impact, nodes.iter().map(|n| (n.id, n.kind))),
            )
        })
        .collect()
}

/// Observation impact of one method over a whole corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactReport {
    pub method: ExplanationMethod,
    pub per_node: BTreeMap<NodeId, f64>,
    pub by_kind: Vec<(NodeKind, f64)>,
    pub series: Vec<(i64, Vec<(NodeKind, f64)>)>,
}

impl ImpactReport {
    pub fn from_sensitivities(
        method: ExplanationMethod,
        corpus: &Corpus,
        sensitivities: &[NodeSensitivity],
    ) -> Self {
        let all = || {
            corpus
                .steps
                .iter()
                .flat_map(|s| s.graph.nodes().iter().map(|n| (n.id, n.kind)))
        };
        let per_node = aggregate_impact(sensitivities, all().map(|(id, _)| id));
        let by_kind = impact_by_type(&per_node, all());
        let series = impact_timeseries(corpus, sensitivities);
        Self {
            method,
            per_node,
            by_kind,
            series,
        }
    }

    pub fn compute(
        method: ExplanationMethod,
        weights: &ModelWeights,
        corpus: &Corpus,
    ) -> Result<Self> {
        let sens = explain_corpus(method, weights, corpus)?;
        Ok(Self::from_sensitivities(method, corpus, &sens))
    }
}
