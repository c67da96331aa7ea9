mod common;

use common::*;
use ndarray::Array2;
use obs_impact::geograph::{build_graph, khop_subgraph, normalized_adjacency, MetNode, NodeId};
use obs_impact::neuralcore::{
    finetune, forward, load_checkpoint, predict, pretrain, save_checkpoint, ModelConfig,
    ModelWeights, SubgraphInput,
};
use rand::seq::SliceRandom;
use rand::Rng;

/// Forward pass with explicit loops over nodes and channels.
fn dense_forward(w: &ModelWeights, x: &SubgraphInput) -> [f64; 4] {
    let n = x.len();
    let d = w.embedding_dim();
    let mut h: Vec<Vec<f64>> = x
        .kinds
        .iter()
        .zip(&x.attributes)
        .map(|(k, a)| {
            let p = &w.projection[k.index()];
            (0..d)
                .map(|c| p.bias[c] + (0..a.len()).map(|j| p.weight[[c, j]] * a[j]).sum::<f64>())
                .collect()
        })
        .collect();
    for layer in &w.gcn {
        let mut next = vec![vec![0.0; d]; n];
        for i in 0..n {
            for c in 0..d {
                let mut z = 0.0;
                for j in 0..n {
                    for a in 0..d {
                        z += x.adjacency[[i, j]] * h[j][a] * layer[[a, c]];
                    }
                }
                next[i][c] = z.max(0.0);
            }
        }
        h = next;
    }
    let mut v: Vec<f64> = (0..d)
        .map(|c| h.iter().map(|r| r[c]).sum::<f64>() / n as f64)
        .collect();
    for (li, layer) in w.head.iter().enumerate() {
        let last = li + 1 == w.head.len();
        v = (0..layer.outputs())
            .map(|o| {
                let z = layer.bias[o]
                    + (0..v.len())
                        .map(|i| layer.weight[[o, i]] * v[i])
                        .sum::<f64>();
                if last {
                    z
                } else {
                    z.max(0.0)
                }
            })
            .collect();
    }
    [v[0], v[1], v[2], v[3]]
}

#[test]
fn forward_matches_dense_loops() {
    let mut rng = rng(21);
    for _ in 0..40 {
        let config = random_config(&mut rng, 8);
        let w = random_weights(&mut rng, &config);
        let n = rng.random_range(1..=7);
        let x = random_input(&mut rng, n);
        let got = predict(&w, &x).unwrap();
        let want = dense_forward(&w, &x);
        for v in 0..4 {
            assert!((got[v] - want[v]).abs() < 1e-12, "{got:?} vs {want:?}");
        }
    }
}

#[test]
fn trace_shapes_follow_the_subgraph() {
    let mut rng = rng(22);
    let config = ModelConfig {
        d: 5,
        n_gcn_layers: 2,
        mlp_hidden: vec![3],
        ..ModelConfig::default()
    };
    let w = random_weights(&mut rng, &config);
    let x = random_input(&mut rng, 4);
    let t = forward(&x, &w).unwrap();
    assert_eq!(t.layers.len(), 3);
    assert!(t.layers.iter().all(|h| h.dim() == (4, 5)));
    assert!(t.pre_activations.iter().all(|h| h.dim() == (4, 5)));
    assert_eq!(t.pooled.len(), 5);
    assert_eq!(
        t.head_pre.iter().map(|z| z.len()).collect::<Vec<_>>(),
        [3, 4]
    );
}

#[test]
fn relabelling_nodes_leaves_predictions_unchanged() {
    let mut rng = rng(23);
    let config = ModelConfig::default();
    for _ in 0..20 {
        let nodes: Vec<MetNode> = (0..60)
            .map(|i| {
                nwp(
                    i,
                    rng.random_range(34.0..35.5),
                    rng.random_range(126.0..127.5),
                )
            })
            .collect();
        let graph = build_graph(nodes, 50.0).unwrap();
        let sub = khop_subgraph(&graph, NodeId(0), 2).unwrap();
        let w = random_weights(&mut rng, &config);
        let attrs: Vec<Vec<f64>> = (0..sub.len())
            .map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let input = SubgraphInput {
            kinds: vec![obs_impact::geograph::NodeKind::Nwp; sub.len()],
            attributes: attrs.clone(),
            adjacency: normalized_adjacency(&sub),
        };
        let mut perm: Vec<usize> = (0..sub.len()).collect();
        perm.shuffle(&mut rng);
        let permuted = SubgraphInput {
            kinds: input.kinds.clone(),
            attributes: perm.iter().map(|&p| attrs[p].clone()).collect(),
            adjacency: normalized_adjacency(&sub.permuted(&perm)),
        };
        let (a, b) = (
            predict(&w, &input).unwrap(),
            predict(&w, &permuted).unwrap(),
        );
        for v in 0..4 {
            assert!((a[v] - b[v]).abs() < 1e-10);
        }
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let mut rng = rng(24);
    let w = random_weights(&mut rng, &ModelConfig::default());
    let mut x = random_input(&mut rng, 3);
    x.attributes[1].push(0.0);
    assert!(predict(&w, &x).is_err());
    let empty = SubgraphInput {
        kinds: vec![],
        attributes: vec![],
        adjacency: Array2::zeros((0, 0)),
    };
    assert!(predict(&w, &empty).is_err());
}

#[test]
fn zero_epochs_return_the_initialization() {
    let (train, _) = small_corpora();
    let config = ModelConfig {
        epochs_pretrain: 0,
        epochs_finetune: 0,
        ..small_model_config()
    };
    let pre = pretrain(&train, &config).unwrap();
    assert_eq!(pre.weights, ModelWeights::init(&config));
    assert!(pre.epoch_losses.is_empty());

    let mut fresh = ModelWeights::init(&config);
    fresh.reconstruction.clear();
    assert_eq!(finetune(&train, None, &config).unwrap().weights, fresh);

    let mut encoder = ModelWeights::init(&ModelConfig {
        seed: 99,
        ..config.clone()
    });
    encoder.gcn[0][[0, 0]] = 42.0;
    let tuned = finetune(&train, Some(&encoder), &config).unwrap().weights;
    assert_eq!(tuned.gcn, encoder.gcn);
    assert_eq!(tuned.projection, encoder.projection);
    assert_eq!(tuned.head, fresh.head);
}

#[test]
fn training_reduces_both_losses() {
    let (train, _) = small_corpora();
    let config = ModelConfig {
        epochs_pretrain: 10,
        epochs_finetune: 10,
        ..small_model_config()
    };
    let pre = pretrain(&train, &config).unwrap();
    assert_eq!(pre.epoch_losses.len(), 10);
    assert!(
        pre.epoch_losses[9] < pre.epoch_losses[0],
        "{:?}",
        pre.epoch_losses
    );
    let tuned = finetune(&train, Some(&pre.weights), &config).unwrap();
    assert!(
        tuned.epoch_losses[9] < tuned.epoch_losses[0],
        "{:?}",
        tuned.epoch_losses
    );
}

#[test]
fn training_is_deterministic() {
    let (train, _) = small_corpora();
    let config = small_model_config();
    let a = pretrain(&train, &config).unwrap();
    let b = pretrain(&train, &config).unwrap();
    assert_eq!(a.weights, b.weights);
    let fa = finetune(&train, Some(&a.weights), &config).unwrap();
    let fb = finetune(&train, Some(&b.weights), &config).unwrap();
    assert_eq!(fa.weights, fb.weights);
    assert_eq!(fa.epoch_losses, fb.epoch_losses);
}

#[test]
fn checkpoint_file_round_trip() {
    let mut rng = rng(25);
    let config = ModelConfig {
        seed: 1234,
        mlp_hidden: vec![5, 3],
        ..ModelConfig::default()
    };
    let w = random_weights(&mut rng, &config);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&path, &w, &config).unwrap();
    let (w2, c2) = load_checkpoint(&path).unwrap();
    assert_eq!(w2, w);
    assert_eq!(c2, config);
    assert!(load_checkpoint(dir.path().join("missing.ckpt")).is_err());
}
