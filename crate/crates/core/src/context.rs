//! Turns a dataset split into standardized per-step graphs and the context
//! subgraph samples the model trains and is explained on.

use crate::error::{Error, Result};
use crate::geograph::{
    build_graph, khop_subgraph, normalized_adjacency, ContextSubgraph, MetGraph, NodeId, NodeKind,
    Variable,
};
use crate::neuralcore::{SubgraphInput, TrainingData, OUTPUTS};
use crate::synthdata::{Dataset, Split};

/// Per-variable z-score statistics, fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: [f64; 6],
    pub sd: [f64; 6],
}

impl Normalizer {
    /// Statistics over every attribute value carried by train nodes.
    pub fn fit(train: &Dataset) -> Result<Self> {
        let mut sum = [0.0; 6];
        let mut sum_sq = [0.0; 6];
        let mut count = [0usize; 6];
        for node in train.steps.iter().flat_map(|s| s.all_nodes()) {
            for (v, x) in node.kind.variables().iter().zip(&node.attributes) {
                let i = v.index();
                sum[i] += x;
                count[i] += 1;
            }
        }
        let mut mean = [0.0; 6];
        for i in 0..6 {
            mean[i] = if count[i] > 0 {
                sum[i] / count[i] as f64
            } else {
                0.0
            };
        }
        for node in train.steps.iter().flat_map(|s| s.all_nodes()) {
            for (v, x) in node.kind.variables().iter().zip(&node.attributes) {
                sum_sq[v.index()] += (x - mean[v.index()]).powi(2);
            }
        }
        let mut sd = [1.0; 6];
        for i in 0..6 {
            if count[i] > 1 {
                let s = (sum_sq[i] / count[i] as f64).sqrt();
                if s > 0.0 {
                    sd[i] = s;
                }
            }
        }
        if count[Variable::U.index()] == 0 {
            return Err(Error::Empty("training split"));
        }
        Ok(Self { mean, sd })
    }

    pub fn identity() -> Self {
        Self {
            mean: [0.0; 6],
            sd: [1.0; 6],
        }
    }

    pub fn standardize(&self, kind: NodeKind, values: &[f64]) -> Vec<f64> {
        kind.variables()
            .iter()
            .zip(values)
            .map(|(v, x)| (x - self.mean[v.index()]) / self.sd[v.index()])
            .collect()
    }

    pub fn standardize_state(&self, state: &[f64; OUTPUTS]) -> [f64; OUTPUTS] {
        std::array::from_fn(|i| {
            let v = Variable::STATE[i].index();
            (state[i] - self.mean[v]) / self.sd[v]
        })
    }

    pub fn restore_state(&self, state: &[f64; OUTPUTS]) -> [f64; OUTPUTS] {
        std::array::from_fn(|i| {
            let v = Variable::STATE[i].index();
            state[i] * self.sd[v] + self.mean[v]
        })
    }
}

/// One time step's proximity graph with standardized node attributes.
#[derive(Debug, Clone)]
pub struct StepGraph {
    pub time: i64,
    pub graph: MetGraph,
    /// Standardized attributes, parallel to `graph.nodes()`.
    pub attributes: Vec<Vec<f64>>,
}

/// A context subgraph around one NWP node with its standardized label.
#[derive(Debug, Clone)]
pub struct Sample {
    pub step: usize,
    pub subgraph: ContextSubgraph,
    pub label: [f64; OUTPUTS],
}

/// All samples of one split.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub split: Split,
    pub steps: Vec<StepGraph>,
    pub samples: Vec<Sample>,
}

impl Corpus {
    /// Builds every step's graph and one k-hop sample per NWP node.
    pub fn build(
        dataset: &Dataset,
        normalizer: &Normalizer,
        radius_km: f64,
        k: usize,
    ) -> Result<Self> {
        let mut steps = Vec::with_capacity(dataset.steps.len());
        let mut samples = Vec::new();
        for (si, step) in dataset.steps.iter().enumerate() {
            let nodes: Vec<_> = step.all_nodes().cloned().collect();
            let graph = build_graph(nodes, radius_km)?;
            let attributes = graph
                .nodes()
                .iter()
                .map(|n| normalizer.standardize(n.kind, &n.attributes))
                .collect();
            for (node, label) in step.nwp.iter().zip(&step.labels) {
                samples.push(Sample {
                    step: si,
                    subgraph: khop_subgraph(&graph, node.id, k)?,
                    label: normalizer.standardize_state(label),
                });
            }
            steps.push(StepGraph {
                time: step.time,
                graph,
                attributes,
            });
        }
        Ok(Self {
            split: dataset.split,
            steps,
            samples,
        })
    }

    pub fn time_of(&self, sample: &Sample) -> i64 {
        self.steps[sample.step].time
    }

    pub fn kind_of(&self, sample: &Sample, id: NodeId) -> NodeKind {
        let g = &self.steps[sample.step].graph;
        g.node(id).expect("subgraph node belongs to its step").kind
    }

    /// Model input for sample `index`, with the listed nodes' attributes
    /// replaced by the training mean (zero after standardization).
    pub fn input_occluded(&self, index: usize, occluded: &[NodeId]) -> Result<SubgraphInput> {
        let sample = &self.samples[index];
        if occluded.contains(&sample.subgraph.center_id) {
            return Err(Error::OccludeCenter(sample.subgraph.center_id));
        }
        let step = &self.steps[sample.step];
        let mut kinds = Vec::with_capacity(sample.subgraph.len());
        let mut attributes = Vec::with_capacity(sample.subgraph.len());
        for id in &sample.subgraph.node_ids {
            let pos = step.graph.position(*id).ok_or(Error::UnknownNode(*id))?;
            let kind = step.graph.nodes()[pos].kind;
            kinds.push(kind);
            if occluded.contains(id) {
                attributes.push(vec![0.0; kind.variables().len()]);
            } else {
                attributes.push(step.attributes[pos].clone());
            }
        }
        Ok(SubgraphInput {
            kinds,
            attributes,
            adjacency: normalized_adjacency(&sample.subgraph),
        })
    }

    /// Edges summed over every step graph.
    pub fn edge_count(&self) -> usize {
        self.steps.iter().map(|s| s.graph.edges().len()).sum()
    }

    pub fn node_count(&self) -> usize {
        self.steps.iter().map(|s| s.graph.len()).sum()
    }

    pub fn labels(&self) -> Vec<[f64; OUTPUTS]> {
        self.samples.iter().map(|s| s.label).collect()
    }
}

impl TrainingData for Corpus {
    fn len(&self) -> usize {
        self.samples.len()
    }

    fn input(&self, index: usize) -> SubgraphInput {
        self.input_occluded(index, &[])
            .expect("corpus samples are consistent with their graphs")
    }

    fn label(&self, index: usize) -> [f64; OUTPUTS] {
        self.samples[index].label
    }
}
