//! Faithfulness of explanations measured by occluding ranked nodes.
//!
//! For each test subgraph, non-center nodes are ranked by score (ties by
//! ascending id). Fidelity+ occludes the top `ceil(f (|V| - 1))` nodes,
//! Fidelity- the bottom ones; both report the drop in accuracy (mean R^2
//! over U, V, T, Q) relative to the unoccluded predictions. Occluded nodes
//! take the training mean, which is zero in standardized units.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::context::Corpus;
use crate::error::{Error, Result};
use crate::explain::{explain_corpus, ExplanationMethod, NodeSensitivity};
use crate::geograph::NodeId;
use crate::neuralcore::{compute_metrics, predict, ModelWeights, SubgraphInput, OUTPUTS};
use crate::parallel::map_indexed;

pub const DEFAULT_FRACTIONS: [f64; 2] = [0.10, 0.20];

/// Source of per-node scores to rank by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ranking {
    Method(ExplanationMethod),
    /// Uniform random scores, seeded per subgraph.
    Random {
        seed: u64,
    },
}

impl fmt::Display for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ranking::Method(m) => m.fmt(f),
            Ranking::Random { .. } => f.write_str("random"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityResult {
    pub ranking: Ranking,
    pub fraction: f64,
    pub fidelity_plus: f64,
    pub fidelity_minus: f64,
    /// Mean R^2 of the unoccluded predictions.
    pub base_accuracy: f64,
}

/// Subgraph input with `nodes` replaced by the uninformative baseline.
pub fn occlude(corpus: &Corpus, index: usize, nodes: &[NodeId]) -> Result<SubgraphInput> {
    corpus.input_occluded(index, nodes)
}

/// Number of non-center nodes to occlude in a subgraph of `nodes` nodes.
pub fn occlusion_count(nodes: usize, fraction: f64) -> usize {
    let raw = fraction * nodes.saturating_sub(1) as f64;
    // Products such as 0.1 * 30 land a hair above the integer.
    ((raw - 1e-9).ceil().max(0.0) as usize).min(nodes.saturating_sub(1))
}

/// Non-center nodes from most to least important.
pub fn rank_nodes(node_ids: &[NodeId], scores: &[f64], center: NodeId) -> Vec<NodeId> {
    let mut ranked: Vec<(NodeId, f64)> = node_ids
        .iter()
        .zip(scores)
        .filter(|(id, _)| **id != center)
        .map(|(id, sc)| (*id, *sc))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().map(|(id, _)| id).collect()
}

/// Mean R^2 over the four outputs.
pub fn accuracy(preds: &[[f64; OUTPUTS]], labels: &[[f64; OUTPUTS]]) -> Result<f64> {
    compute_metrics(preds, labels)?
        .mean_r2()
        .ok_or_else(|| Error::InvalidConfig("R^2 undefined: a label has zero variance".into()))
}

/// Uniform scores in [0, 1) per node; each subgraph has its own stream.
pub fn random_scores(corpus: &Corpus, seed: u64) -> Vec<Vec<f64>> {
    corpus
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            s.subgraph.node_ids.iter().map(|_| rng.random()).collect()
        })
        .collect()
}

fn ranking_scores(
    ranking: Ranking,
    weights: &ModelWeights,
    corpus: &Corpus,
) -> Result<Vec<Vec<f64>>> {
    match ranking {
        Ranking::Method(m) => Ok(explain_corpus(m, weights, corpus)?
            .into_iter()
            .map(|s: NodeSensitivity| s.scores)
            .collect()),
        Ranking::Random { seed } => Ok(random_scores(corpus, seed)),
    }
}

pub fn predict_corpus(weights: &ModelWeights, corpus: &Corpus) -> Result<Vec<[f64; OUTPUTS]>> {
    map_indexed(corpus.samples.len(), |i| {
        predict(weights, &occlude(corpus, i, &[])?)
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Top,
    Bottom,
}

fn occluded_predictions(
    weights: &ModelWeights,
    corpus: &Corpus,
    scores: &[Vec<f64>],
    base: &[[f64; OUTPUTS]],
    fraction: f64,
    side: Side,
) -> Result<Vec<[f64; OUTPUTS]>> {
    map_indexed(corpus.samples.len(), |i| {
        let sample = &corpus.samples[i];
        let ranked = rank_nodes(
            &sample.subgraph.node_ids,
            &scores[i],
            sample.subgraph.center_id,
        );
        let m = occlusion_count(sample.subgraph.len(), fraction);
        if m == 0 {
            return Ok(base[i]);
        }
        let chosen = match side {
            Side::Top => &ranked[..m],
            Side::Bottom => &ranked[ranked.len() - m..],
        };
        predict(weights, &occlude(corpus, i, chosen)?)
    })
    .into_iter()
    .collect()
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "fraction {fraction} outside (0, 1)"
        )))
    }
}

fn one_sided(
    weights: &ModelWeights,
    corpus: &Corpus,
    ranking: Ranking,
    fraction: f64,
    side: Side,
) -> Result<f64> {
    check_fraction(fraction)?;
    let labels = corpus.labels();
    let base = predict_corpus(weights, corpus)?;
    let scores = ranking_scores(ranking, weights, corpus)?;
    let occluded = occluded_predictions(weights, corpus, &scores, &base, fraction, side)?;
    Ok(accuracy(&base, &labels)? - accuracy(&occluded, &labels)?)
}

/// Accuracy lost when the most important nodes are occluded.
pub fn fidelity_plus(
    weights: &ModelWeights,
    corpus: &Corpus,
    ranking: Ranking,
    fraction: f64,
) -> Result<f64> {
    one_sided(weights, corpus, ranking, fraction, Side::Top)
}

/// Accuracy lost when the least important nodes are occluded.
pub fn fidelity_minus(
    weights: &ModelWeights,
    corpus: &Corpus,
    ranking: Ranking,
    fraction: f64,
) -> Result<f64> {
    one_sided(weights, corpus, ranking, fraction, Side::Bottom)
}

/// Fidelity+/- of every ranking at every fraction, sharing the base
/// predictions and each ranking's scores.
pub fn evaluate_fidelity(
    weights: &ModelWeights,
    corpus: &Corpus,
    rankings: &[Ranking],
    fractions: &[f64],
) -> Result<Vec<FidelityResult>> {
    fractions.iter().try_for_each(|&f| check_fraction(f))?;
    let labels = corpus.labels();
    let base = predict_corpus(weights, corpus)?;
    let base_accuracy = accuracy(&base, &labels)?;
    let mut out = Vec::new();
    for &ranking in rankings {
        let scores = ranking_scores(ranking, weights, corpus)?;
        for &fraction in fractions {
            let plus = occluded_predictions(weights, corpus, &scores, &base, fraction, Side::Top)?;
            let minus =
                occluded_predictions(weights, corpus, &scores, &base, fraction, Side::Bottom)?;
            out.push(FidelityResult {
                ranking,
                fraction,
                fidelity_plus: base_accuracy - accuracy(&plus, &labels)?,
                fidelity_minus: base_accuracy - accuracy(&minus, &labels)?,
                base_accuracy,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occlusion_counts() {
        assert_eq!(occlusion_count(1, 0.2), 0);
        assert_eq!(occlusion_count(2, 0.1), 1);
        assert_eq!(occlusion_count(11, 0.1), 1);
        assert_eq!(occlusion_count(11, 0.2), 2);
        assert_eq!(occlusion_count(12, 0.2), 3);
        assert_eq!(occlusion_count(31, 0.1), 3);
        assert_eq!(occlusion_count(50, 1e-12), 0);
    }

    #[test]
    fn ranking_orders_by_score_then_id() {
        let ids = [1, 5, 3, 4, 2].map(NodeId);
        let scores = [9.0, 0.5, 0.5, 2.0, 0.1];
        assert_eq!(
            rank_nodes(&ids, &scores, NodeId(1)),
            [4, 3, 5, 2].map(NodeId).to_vec()
        );
    }

    #[test]
    fn fractions_are_checked() {
        assert!(check_fraction(0.0).is_err());
        assert!(check_fraction(1.0).is_err());
        assert!(check_fraction(0.2).is_ok());
    }
}
