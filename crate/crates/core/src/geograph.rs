//! Meteorological graph of NWP grid points and observations.
//!
//! Nodes are linked when their great-circle distance is within a radius
//! (50 km by default). Context subgraphs are k-hop ego networks around NWP
//! nodes; they are the unit sample for estimation and explanation.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Mean Earth radius used for every distance in the crate.
pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const DEFAULT_RADIUS_KM: f64 = 50.0;
pub const DEFAULT_HOPS: usize = 2;
pub const PRESSURE_LEVEL_HPA: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
    pub pressure_level: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self {
            lat,
            lon,
            pressure_level: PRESSURE_LEVEL_HPA,
        }
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat)
            && (-180.0..180.0).contains(&self.lon)
            && self.pressure_level > 0.0
    }
}

/// Great-circle distance in kilometres.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Weather variable carried by a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variable {
    U,
    V,
    T,
    Q,
    Tb,
    Ba,
}

impl Variable {
    pub const ALL: [Variable; 6] = [
        Variable::U,
        Variable::V,
        Variable::T,
        Variable::Q,
        Variable::Tb,
        Variable::Ba,
    ];
    /// The four estimated state variables, in output order.
    pub const STATE: [Variable; 4] = [Variable::U, Variable::V, Variable::T, Variable::Q];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Variable::U => "U",
            Variable::V => "V",
            Variable::T => "T",
            Variable::Q => "Q",
            Variable::Tb => "TB",
            Variable::Ba => "BA",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Nwp,
    Aircraft,
    Gpsro,
    Sonde,
    Amv,
    Amsua,
    Amsr2,
    Atms,
    Cris,
    Gk2a,
    Iasi,
    Mhs,
}

impl NodeKind {
    pub const ALL: [NodeKind; 12] = [
        NodeKind::Nwp,
        NodeKind::Aircraft,
        NodeKind::Gpsro,
        NodeKind::Sonde,
        NodeKind::Amv,
        NodeKind::Amsua,
        NodeKind::Amsr2,
        NodeKind::Atms,
        NodeKind::Cris,
        NodeKind::Gk2a,
        NodeKind::Iasi,
        NodeKind::Mhs,
    ];

    pub const OBSERVATIONS: [NodeKind; 11] = [
        NodeKind::Aircraft,
        NodeKind::Gpsro,
        NodeKind::Sonde,
        NodeKind::Amv,
        NodeKind::Amsua,
        NodeKind::Amsr2,
        NodeKind::Atms,
        NodeKind::Cris,
        NodeKind::Gk2a,
        NodeKind::Iasi,
        NodeKind::Mhs,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_observation(self) -> bool {
        self != NodeKind::Nwp
    }

    /// Ordered variable list carried by this kind.
    pub fn variables(self) -> &'static [Variable] {
        use Variable::*;
        match self {
            NodeKind::Nwp | NodeKind::Sonde => &[U, V, T, Q],
            NodeKind::Aircraft => &[U, V, T],
            NodeKind::Gpsro => &[Ba],
            _ => &[Tb],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Nwp => "NWP",
            NodeKind::Aircraft => "AIRCRAFT",
            NodeKind::Gpsro => "GPSRO",
            NodeKind::Sonde => "SONDE",
            NodeKind::Amv => "AMV",
            NodeKind::Amsua => "AMSUA",
            NodeKind::Amsr2 => "AMSR2",
            NodeKind::Atms => "ATMS",
            NodeKind::Cris => "CRIS",
            NodeKind::Gk2a => "GK2A",
            NodeKind::Iasi => "IASI",
            NodeKind::Mhs => "MHS",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NodeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub location: GeoPoint,
    pub time_index: i64,
    pub attributes: Vec<f64>,
}

impl MetNode {
    pub fn new(
        id: NodeId,
        kind: NodeKind,
        location: GeoPoint,
        time_index: i64,
        attributes: Vec<f64>,
    ) -> Result<Self> {
        let node = Self {
            id,
            kind,
            location,
            time_index,
            attributes,
        };
        node.validate()?;
        Ok(node)
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.kind.variables().len();
        if self.attributes.len() != expected {
            return Err(Error::AttributeCount {
                kind: self.kind,
                expected,
                got: self.attributes.len(),
            });
        }
        if self.attributes.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("attributes of node {}", self.id)));
        }
        Ok(())
    }
}

/// Proximity graph over a set of nodes. Immutable once built.
#[derive(Debug, Clone)]
pub struct MetGraph {
    nodes: Vec<MetNode>,
    edges: Vec<(NodeId, NodeId)>,
    index: HashMap<NodeId, usize>,
    neighbors: Vec<Vec<usize>>,
    radius_km: f64,
}

impl MetGraph {
    pub fn nodes(&self) -> &[MetNode] {
        &self.nodes
    }

    /// Undirected edges as `(smaller id, larger id)`, sorted.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn radius_km(&self) -> f64 {
        self.radius_km
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn position(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn node(&self, id: NodeId) -> Option<&MetNode> {
        self.position(id).map(|i| &self.nodes[i])
    }

    /// Neighbor positions of the node at `pos`, sorted by id.
    pub fn neighbors_of(&self, pos: usize) -> &[usize] {
        &self.neighbors[pos]
    }
}

/// Links every pair of distinct nodes within `radius_km` of each other.
///
/// Candidates are swept in latitude order: two points further apart in
/// latitude than the radius cannot be within it, since the great-circle
/// distance is at least the meridional arc between their parallels.
pub fn build_graph(nodes: Vec<MetNode>, radius_km: f64) -> Result<MetGraph> {
    let mut index = HashMap::with_capacity(nodes.len());
    for (pos, node) in nodes.iter().enumerate() {
        if index.insert(node.id, pos).is_some() {
            return Err(Error::DuplicateNode(node.id));
        }
    }

    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| {
        nodes[a]
            .location
            .lat
            .total_cmp(&nodes[b].location.lat)
            .then(nodes[a].id.cmp(&nodes[b].id))
    });
    // Slightly widened so rounding never prunes a true neighbor.
    let lat_window = (radius_km / EARTH_RADIUS_KM).to_degrees() * (1.0 + 1e-9) + 1e-12;

    let mut neighbors = vec![Vec::new(); nodes.len()];
    for (rank, &a) in order.iter().enumerate() {
        let pa = nodes[a].location;
        for &b in &order[rank + 1..] {
            let pb = nodes[b].location;
            if pb.lat - pa.lat > lat_window {
                break;
            }
            if haversine_km(pa, pb) <= radius_km {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
    }
    for list in &mut neighbors {
        list.sort_by_key(|&p| nodes[p].id);
    }

    let nodes_ref = &nodes;
    let mut edges: Vec<(NodeId, NodeId)> = neighbors
        .iter()
        .enumerate()
        .flat_map(|(a, list)| {
            let ida = nodes_ref[a].id;
            list.iter()
                .map(move |&b| (ida, nodes_ref[b].id))
                .filter(|(x, y)| x < y)
        })
        .collect();
    edges.sort();

    Ok(MetGraph {
        nodes,
        edges,
        index,
        neighbors,
        radius_km,
    })
}

/// A k-hop ego network around an NWP node.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSubgraph {
    pub center_id: NodeId,
    /// Center first, then ordered by (hop distance, id).
    pub node_ids: Vec<NodeId>,
    /// Hop distance from the center, parallel to `node_ids`.
    pub hops: Vec<usize>,
    /// Induced 0/1 adjacency with zero diagonal.
    pub adjacency: Array2<u8>,
    pub k: usize,
}

impl ContextSubgraph {
    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&a| a != 0).count() / 2
    }

    /// Reorders nodes by `perm`, where new position `i` holds old node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> ContextSubgraph {
        let n = self.len();
        assert_eq!(perm.len(), n, "permutation length");
        let adjacency = Array2::from_shape_fn((n, n), |(i, j)| self.adjacency[[perm[i], perm[j]]]);
        ContextSubgraph {
            center_id: self.center_id,
            node_ids: perm.iter().map(|&p| self.node_ids[p]).collect(),
            hops: perm.iter().map(|&p| self.hops[p]).collect(),
            adjacency,
            k: self.k,
        }
    }
}

pub fn khop_subgraph(graph: &MetGraph, center: NodeId, k: usize) -> Result<ContextSubgraph> {
    if k == 0 {
        return Err(Error::ZeroHops);
    }
    let start = graph.position(center).ok_or(Error::UnknownNode(center))?;
    let kind = graph.nodes[start].kind;
    if kind != NodeKind::Nwp {
        return Err(Error::CenterNotNwp { id: center, kind });
    }

    let mut hop: HashMap<usize, usize> = HashMap::from([(start, 0)]);
    let mut queue = VecDeque::from([start]);
    while let Some(pos) = queue.pop_front() {
        let h = hop[&pos];
        if h == k {
            continue;
        }
        for &nb in graph.neighbors_of(pos) {
            if let std::collections::hash_map::Entry::Vacant(e) = hop.entry(nb) {
                e.insert(h + 1);
                queue.push_back(nb);
            }
        }
    }

    let mut members: Vec<(usize, usize)> = hop.into_iter().map(|(p, h)| (h, p)).collect();
    members.sort_by_key(|&(h, p)| (h, graph.nodes[p].id));

    let n = members.len();
    let local: HashMap<usize, usize> = members
        .iter()
        .enumerate()
        .map(|(i, &(_, p))| (p, i))
        .collect();
    let mut adjacency = Array2::zeros((n, n));
    for (i, &(_, p)) in members.iter().enumerate() {
        for nb in graph.neighbors_of(p) {
            if let Some(&j) = local.get(nb) {
                adjacency[[i, j]] = 1;
            }
        }
    }

    Ok(ContextSubgraph {
        center_id: center,
        node_ids: members.iter().map(|&(_, p)| graph.nodes[p].id).collect(),
        hops: members.iter().map(|&(h, _)| h).collect(),
        adjacency,
        k,
    })
}

/// `D^-1/2 (A + I) D^-1/2` for the subgraph's induced adjacency.
pub fn normalized_adjacency(s: &ContextSubgraph) -> Array2<f64> {
    normalize_adjacency(&s.adjacency)
}

pub(crate) fn normalize_adjacency(adjacency: &Array2<u8>) -> Array2<f64> {
    let n = adjacency.nrows();
    let inv_sqrt_deg: Vec<f64> = adjacency
        .rows()
        .into_iter()
        .map(|row| {
            let deg = 1.0 + row.iter().filter(|&&a| a != 0).count() as f64;
            deg.sqrt().recip()
        })
        .collect();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let a = if i == j || adjacency[[i, j]] != 0 {
            1.0
        } else {
            0.0
        };
        inv_sqrt_deg[i] * a * inv_sqrt_deg[j]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nwp(id: u64, lat: f64, lon: f64) -> MetNode {
        MetNode::new(
            NodeId(id),
            NodeKind::Nwp,
            GeoPoint::new(lat, lon),
            0,
            vec![0.0; 4],
        )
        .unwrap()
    }

    #[test]
    fn haversine_identity_and_antipode() {
        let p = GeoPoint::new(35.0, 128.0);
        assert_eq!(haversine_km(p, p), 0.0);
        let d = haversine_km(GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, -180.0));
        assert!((d - std::f64::consts::PI * EARTH_RADIUS_KM).abs() < 1e-6);
        assert!((d - 20015.1).abs() < 0.05);
    }

    #[test]
    fn haversine_seoul_busan_matches_law_of_cosines() {
        // Spherical law of cosines, evaluated independently beforehand.
        let expected = 325.1112588497568;
        let d = haversine_km(
            GeoPoint::new(37.5665, 126.9780),
            GeoPoint::new(35.1796, 129.0756),
        );
        assert!((d - expected).abs() < 0.1, "{d}");
    }

    #[test]
    fn kind_variables() {
        assert_eq!(NodeKind::Aircraft.variables().len(), 3);
        assert_eq!(NodeKind::Gpsro.variables(), &[Variable::Ba]);
        assert_eq!(NodeKind::Sonde.variables(), NodeKind::Nwp.variables());
        for kind in NodeKind::OBSERVATIONS {
            assert_eq!(kind.name().parse::<NodeKind>().unwrap(), kind);
        }
        assert!("RADAR".parse::<NodeKind>().is_err());
    }

    #[test]
    fn node_rejects_wrong_attribute_count() {
        let err = MetNode::new(
            NodeId(1),
            NodeKind::Sonde,
            GeoPoint::new(0.0, 0.0),
            0,
            vec![1.0; 3],
        );
        assert!(matches!(
            err,
            Err(Error::AttributeCount { expected: 4, .. })
        ));
        let err = MetNode::new(
            NodeId(1),
            NodeKind::Gpsro,
            GeoPoint::new(0.0, 0.0),
            0,
            vec![f64::NAN],
        );
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn radius_threshold() {
        // 0.09 degrees of latitude is ~10 km, 0.54 is ~60 km.
        let g = build_graph(vec![nwp(1, 35.0, 128.0), nwp(2, 35.09, 128.0)], 50.0).unwrap();
        assert_eq!(g.edges(), &[(NodeId(1), NodeId(2))]);
        let g = build_graph(vec![nwp(1, 35.0, 128.0), nwp(2, 35.54, 128.0)], 50.0).unwrap();
        assert!(g.edges().is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = build_graph(vec![nwp(1, 35.0, 128.0), nwp(1, 36.0, 128.0)], 50.0);
        assert!(matches!(err, Err(Error::DuplicateNode(NodeId(1)))));
    }

    fn path_graph() -> MetGraph {
        // Roughly 33 km apart along a parallel.
        build_graph(
            vec![nwp(1, 0.0, 0.0), nwp(2, 0.0, 0.3), nwp(3, 0.0, 0.6)],
            50.0,
        )
        .unwrap()
    }

    #[test]
    fn khop_on_path() {
        let g = path_graph();
        assert_eq!(g.edges().len(), 2);
        let s1 = khop_subgraph(&g, NodeId(1), 1).unwrap();
        assert_eq!(s1.node_ids, vec![NodeId(1), NodeId(2)]);
        assert_eq!(s1.edge_count(), 1);
        let s2 = khop_subgraph(&g, NodeId(1), 2).unwrap();
        assert_eq!(s2.node_ids, vec![NodeId(1), NodeId(2), NodeId(3)]);
        assert_eq!(s2.edge_count(), 2);
        assert_eq!(s2.hops, vec![0, 1, 2]);
    }

    #[test]
    fn khop_errors_and_isolated_center() {
        let mut nodes = vec![nwp(1, 0.0, 0.0), nwp(5, 10.0, 10.0)];
        nodes.push(
            MetNode::new(
                NodeId(2),
                NodeKind::Gpsro,
                GeoPoint::new(0.0, 0.2),
                0,
                vec![0.01],
            )
            .unwrap(),
        );
        let g = build_graph(nodes, 50.0).unwrap();
        assert!(matches!(
            khop_subgraph(&g, NodeId(2), 1),
            Err(Error::CenterNotNwp { .. })
        ));
        assert!(matches!(
            khop_subgraph(&g, NodeId(1), 0),
            Err(Error::ZeroHops)
        ));
        assert!(matches!(
            khop_subgraph(&g, NodeId(9), 1),
            Err(Error::UnknownNode(_))
        ));
        let lone = khop_subgraph(&g, NodeId(5), 3).unwrap();
        assert_eq!(lone.node_ids, vec![NodeId(5)]);
        assert_eq!(normalized_adjacency(&lone), Array2::from_elem((1, 1), 1.0));
    }

    #[test]
    fn two_node_normalization_is_half() {
        let g = path_graph();
        let s = khop_subgraph(&g, NodeId(3), 1).unwrap();
        let a = normalized_adjacency(&s);
        assert_eq!(a.dim(), (2, 2));
        assert!(a.iter().all(|&x| (x - 0.5).abs() < 1e-15));
    }
}
