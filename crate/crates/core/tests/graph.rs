mod common;

use std::collections::BTreeSet;

use common::*;
use obs_impact::geograph::{
    build_graph, khop_subgraph, normalized_adjacency, GeoPoint, MetNode, NodeId, NodeKind,
};
use obs_impact::Error;
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = Vec<MetNode>> {
    prop::collection::vec((34.0f64..35.5, 126.0f64..127.8, 0usize..12), 1..300).prop_map(|pts| {
        // Reverse ids so that id order differs from insertion order.
        let n = pts.len() as u64;
        pts.into_iter()
            .enumerate()
            .map(|(i, (lat, lon, k))| {
                let kind = if i == 0 {
                    NodeKind::Nwp
                } else {
                    NodeKind::ALL[k]
                };
                MetNode::new(
                    NodeId(3 * (n - i as u64)),
                    kind,
                    GeoPoint::new(lat, lon),
                    0,
                    vec![0.0; kind.variables().len()],
                )
                .unwrap()
            })
            .collect()
    })
}

fn power_iteration_spectral_radius(a: &ndarray::Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut x = ndarray::Array1::from_shape_fn(n, |i| 1.0 + i as f64 * 0.37);
    let mut lambda = 0.0;
    for _ in 0..500 {
        let y = a.dot(&x);
        let norm = y.dot(&y).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm / x.dot(&x).sqrt();
        x = y / norm;
    }
    lambda
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn graph_matches_brute_force(nodes in instance(), radius in 5.0f64..60.0) {
        let expected = brute_edges(&nodes, radius);
        let graph = build_graph(nodes, radius).unwrap();
        let got: BTreeSet<_> = graph.edges().iter().copied().collect();
        prop_assert_eq!(got.len(), graph.edges().len(), "duplicate edges");
        prop_assert!(graph.edges().iter().all(|(a, b)| a < b));
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn subgraph_matches_bfs(nodes in instance(), k in 1usize..4) {
        let center = nodes[0].id;
        let edges = brute_edges(&nodes, 50.0);
        let graph = build_graph(nodes, 50.0).unwrap();
        let sub = khop_subgraph(&graph, center, k).unwrap();
        let hops = bfs_oracle(&edges, center, k);

        let mut order: Vec<(usize, NodeId)> = hops.iter().map(|(&id, &h)| (h, id)).collect();
        order.sort();
        prop_assert_eq!(&sub.node_ids, &order.iter().map(|p| p.1).collect::<Vec<_>>());
        prop_assert_eq!(&sub.hops, &order.iter().map(|p| p.0).collect::<Vec<_>>());
        for (i, a) in sub.node_ids.iter().enumerate() {
            for (j, b) in sub.node_ids.iter().enumerate() {
                let linked = edges.contains(&(*a.min(b), *a.max(b)));
                prop_assert_eq!(sub.adjacency[[i, j]] == 1, linked);
            }
        }
    }

    #[test]
    fn normalized_adjacency_is_symmetric_and_bounded(nodes in instance(), k in 1usize..3) {
        let center = nodes[0].id;
        let graph = build_graph(nodes, 50.0).unwrap();
        let sub = khop_subgraph(&graph, center, k).unwrap();
        let a = normalized_adjacency(&sub);
        let oracle = normalize_oracle(&sub.adjacency);
        for (x, y) in a.iter().zip(oracle.iter()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!(a.iter().zip(a.t().iter()).all(|(x, y)| x == y));
        prop_assert!(power_iteration_spectral_radius(&a) <= 1.0 + 1e-9);
    }

    #[test]
    fn larger_k_never_loses_nodes(nodes in instance(), k in 1usize..4) {
        let center = nodes[0].id;
        let graph = build_graph(nodes, 50.0).unwrap();
        let small: BTreeSet<_> = khop_subgraph(&graph, center, k).unwrap().node_ids.into_iter().collect();
        let large: BTreeSet<_> = khop_subgraph(&graph, center, k + 1).unwrap().node_ids.into_iter().collect();
        prop_assert!(small.is_subset(&large));
    }
}

#[test]
fn invalid_requests_are_rejected() {
    let graph = build_graph(vec![nwp(1, 35.0, 127.0)], 50.0).unwrap();
    assert!(matches!(
        khop_subgraph(&graph, NodeId(1), 0),
        Err(Error::ZeroHops)
    ));
    assert!(matches!(
        khop_subgraph(&graph, NodeId(9), 1),
        Err(Error::UnknownNode(NodeId(9)))
    ));
    assert!(matches!(
        build_graph(vec![nwp(1, 35.0, 127.0), nwp(1, 36.0, 127.0)], 50.0),
        Err(Error::DuplicateNode(_))
    ));
}

#[test]
fn grid_rows_connect_at_default_spacing() {
    // Two stacked grid points 0.44 degrees apart in latitude are linked.
    let graph = build_graph(vec![nwp(1, 35.0, 127.0), nwp(2, 35.44, 127.0)], 50.0).unwrap();
    assert_eq!(graph.edges(), &[(NodeId(1), NodeId(2))]);
}
