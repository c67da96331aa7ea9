#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use obs_impact::context::{Corpus, Normalizer};
use obs_impact::geograph::{GeoPoint, MetNode, NodeId, NodeKind};
use obs_impact::neuralcore::{ModelConfig, ModelWeights, SubgraphInput};
use obs_impact::synthdata::{generate_split, FieldSpec, ObsCounts, Region};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `D^-1/2 (A + I) D^-1/2` written out entry by entry.
pub fn normalize_oracle(adj: &Array2<u8>) -> Array2<f64> {
    let n = adj.nrows();
    let mut a = Array2::<f64>::eye(n);
    for i in 0..n {
        for j in 0..n {
            if adj[[i, j]] != 0 {
                a[[i, j]] = 1.0;
            }
        }
    }
    let deg: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| a[[i, j]] / (deg[i] * deg[j]).sqrt())
}

pub fn random_adjacency(rng: &mut impl Rng, n: usize, p: f64) -> Array2<u8> {
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                a[[i, j]] = 1;
                a[[j, i]] = 1;
            }
        }
    }
    a
}

pub fn random_kind(rng: &mut impl Rng) -> NodeKind {
    NodeKind::ALL[rng.random_range(0..NodeKind::ALL.len())]
}

/// Random model-ready subgraph; node 0 is NWP.
pub fn random_input(rng: &mut impl Rng, n: usize) -> SubgraphInput {
    let kinds: Vec<NodeKind> = (0..n)
        .map(|i| {
            if i == 0 {
                NodeKind::Nwp
            } else {
                random_kind(rng)
            }
        })
        .collect();
    let attributes = kinds
        .iter()
        .map(|k| {
            (0..k.variables().len())
                .map(|_| rng.random_range(-2.0..2.0))
                .collect()
        })
        .collect();
    SubgraphInput {
        kinds,
        attributes,
        adjacency: normalize_oracle(&random_adjacency(rng, n, 0.5)),
    }
}

pub fn random_config(rng: &mut impl Rng, max_d: usize) -> ModelConfig {
    let hidden = (0..rng.random_range(0..=2))
        .map(|_| rng.random_range(1..=6))
        .collect();
    ModelConfig {
        d: rng.random_range(1..=max_d),
        n_gcn_layers: rng.random_range(0..=3),
        mlp_hidden: hidden,
        seed: rng.random(),
        ..ModelConfig::default()
    }
}

/// Fresh weights drawn from `rng`, every bias made nonzero.
pub fn random_weights(rng: &mut impl Rng, config: &ModelConfig) -> ModelWeights {
    let mut w = ModelWeights::init(&ModelConfig {
        seed: rng.random(),
        ..config.clone()
    });
    for t in w.tensors_mut() {
        if !t.regularized {
            t.data
                .iter_mut()
                .for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
    }
    w
}

pub fn nwp(id: u64, lat: f64, lon: f64) -> MetNode {
    MetNode::new(
        NodeId(id),
        NodeKind::Nwp,
        GeoPoint::new(lat, lon),
        0,
        vec![0.0; 4],
    )
    .unwrap()
}

/// A few steps over a small box, cheap enough for unit-scale tests.
pub fn small_spec() -> FieldSpec {
    FieldSpec {
        region: Region {
            lat_min: 34.0,
            lat_max: 37.0,
            lon_min: 126.0,
            lon_max: 129.0,
        },
        n_bumps: 6,
        ..FieldSpec::default()
    }
}

pub fn small_corpora() -> (Corpus, Corpus) {
    let spec = small_spec();
    let (train, test) = generate_split(&spec, &ObsCounts::uniform(6), 3, 2).unwrap();
    let norm = Normalizer::fit(&train).unwrap();
    (
        Corpus::build(&train, &norm, 50.0, 2).unwrap(),
        Corpus::build(&test, &norm, 50.0, 2).unwrap(),
    )
}

pub fn small_model_config() -> ModelConfig {
    ModelConfig {
        d: 8,
        mlp_hidden: vec![8],
        epochs_pretrain: 2,
        epochs_finetune: 2,
        batch_size: 16,
        lr: 5e-3,
        ..ModelConfig::default()
    }
}

/// Coefficient of determination, `1 - SS_res / SS_tot`, averaged over outputs.
pub fn mean_r2_oracle(preds: &[[f64; 4]], labels: &[[f64; 4]]) -> f64 {
    let n = labels.len() as f64;
    let mut total = 0.0;
    for v in 0..4 {
        let mean = labels.iter().map(|l| l[v]).sum::<f64>() / n;
        let ss_tot: f64 = labels.iter().map(|l| (l[v] - mean).powi(2)).sum();
        let ss_res: f64 = preds
            .iter()
            .zip(labels)
            .map(|(p, l)| (l[v] - p[v]).powi(2))
            .sum();
        total += 1.0 - ss_res / ss_tot;
    }
    total / 4.0
}

/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps near-zero entries from
/// dominating through round-off in the difference quotient.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5)
}

/// Largest relative error between `grads` and central differences of `loss`
/// over every parameter entry.
pub fn max_fd_error(
    weights: &ModelWeights,
    grads: &ModelWeights,
    loss: impl Fn(&ModelWeights) -> f64,
) -> f64 {
    let h = 1e-5;
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.data.to_vec()).collect();
    let mut worst: f64 = 0.0;
    let mut probe = weights.clone();
    for (ti, g) in analytic.iter().enumerate() {
        for (j, &a) in g.iter().enumerate() {
            let orig = probe.tensors_mut()[ti].data[j];
            probe.tensors_mut()[ti].data[j] = orig + h;
            let up = loss(&probe);
            probe.tensors_mut()[ti].data[j] = orig - h;
            let down = loss(&probe);
            probe.tensors_mut()[ti].data[j] = orig;
            worst = worst.max(relative_error(a, (up - down) / (2.0 * h)));
        }
    }
    worst
}

/// Smallest distance of any rectifier input to its kink.
pub fn kink_margin(weights: &ModelWeights, input: &SubgraphInput) -> f64 {
    let trace = obs_impact::neuralcore::forward(input, weights).unwrap();
    let hidden_heads = trace.head_pre.len().saturating_sub(1);
    trace
        .pre_activations
        .iter()
        .flat_map(|p| p.iter().copied())
        .chain(
            trace.head_pre[..hidden_heads]
                .iter()
                .flat_map(|p| p.iter().copied()),
        )
        .map(f64::abs)
        .fold(f64::INFINITY, f64::min)
}

/// Great-circle distance through the chord between unit vectors.
pub fn chord_distance_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let v = |p: GeoPoint| {
        let (lat, lon) = (p.lat.to_radians(), p.lon.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    };
    let (p, q) = (v(a), v(b));
    let chord = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
    2.0 * 6371.0 * (chord / 2.0).asin()
}

pub fn brute_edges(nodes: &[MetNode], radius: f64) -> BTreeSet<(NodeId, NodeId)> {
    let mut out = BTreeSet::new();
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            if chord_distance_km(a.location, b.location) <= radius {
                out.insert((a.id.min(b.id), a.id.max(b.id)));
            }
        }
    }
    out
}

/// Hop distance of every node reachable within `k`, by frontier expansion.
pub fn bfs_oracle(
    edges: &BTreeSet<(NodeId, NodeId)>,
    center: NodeId,
    k: usize,
) -> BTreeMap<NodeId, usize> {
    let mut hops = BTreeMap::from([(center, 0)]);
    let mut frontier = vec![center];
    for h in 1..=k {
        let mut next = Vec::new();
        for &(a, b) in edges {
            for (x, y) in [(a, b), (b, a)] {
                if frontier.contains(&x) && !hops.contains_key(&y) {
                    hops.insert(y, h);
                    next.push(y);
                }
            }
        }
        frontier = next;
    }
    hops
}

/// Nonnegative weights and inputs with zero biases keep every activation positive.
pub fn positive_model(
    rng: &mut impl Rng,
    d: usize,
    layers: usize,
    hidden: Vec<usize>,
) -> ModelWeights {
    let config = ModelConfig {
        d,
        n_gcn_layers: layers,
        mlp_hidden: hidden,
        ..ModelConfig::default()
    };
    let mut w = ModelWeights::init(&ModelConfig {
        seed: rng.random(),
        ..config
    });
    for t in w.tensors_mut() {
        for x in t.data.iter_mut() {
            *x = if t.regularized {
                rng.random_range(0.05..1.0)
            } else {
                0.0
            };
        }
    }
    w
}

pub fn positive_input(rng: &mut impl Rng, n: usize) -> SubgraphInput {
    let mut x = random_input(rng, n);
    for a in x.attributes.iter_mut().flatten() {
        *a = rng.random_range(0.1..2.0);
    }
    x
}

/// Draws inputs until every rectifier input is well away from zero, so
/// central differences never straddle a kink.
pub fn smooth_instance(
    rng: &mut impl Rng,
    config: &ModelConfig,
) -> (ModelWeights, Vec<(SubgraphInput, [f64; 4])>) {
    for attempt in 0.. {
        assert!(attempt < 1000, "no smooth instance for {config:?}");
        let weights = random_weights(rng, config);
        let batch: Vec<(SubgraphInput, [f64; 4])> = (0..2)
            .map(|_| {
                let n = rng.random_range(1..=6);
                (
                    random_input(rng, n),
                    [0.0; 4].map(|_| rng.random_range(-1.0..1.0)),
                )
            })
            .collect();
        if batch.iter().all(|(x, _)| kink_margin(&weights, x) > 1e-3) {
            return (weights, batch);
        }
    }
    unreachable!()
}
