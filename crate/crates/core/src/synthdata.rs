//! Synthetic atmospheric fields, NWP grids and multi-type observations.
//!
//! Each state variable (U, V, T, Q) is a constant base plus a sum of
//! Gaussian bumps whose centers drift eastward with time:
//!
//! ```text
//! f(lat, lon, t) = base + sum_b A_b * exp(-((lat - lat_b)^2 + (lon - lon_b(t))^2) / (2 s_b^2))
//! lon_b(t) = west - m + ((lon_b0 - west + m + speed_b * c * t) mod (width + 2m))
//! ```
//!
//! where `c` is the advection speed in degrees per step, `speed_b` a per-bump
//! factor and `m` a wrap margin wide enough that wrapping happens well outside
//! the region. Instrument variables are derived from the state:
//!
//! ```text
//! TB = 0.9 T + 2000 Q + 15        (K)
//! BA = 0.02 + 5 Q - 1e-4 (T - 255)  (rad)
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geograph::{GeoPoint, MetNode, NodeId, NodeKind, Variable};

pub const DATASET_MAGIC: &str = "# obs-impact dataset v1";
const HEADER: &str = "id,kind,lat,lon,time,role,values...";

const BASE: [f64; 4] = [10.0, 0.0, 255.0, 1.5e-3];
const AMPLITUDE: [f64; 4] = [10.0, 10.0, 8.0, 1.0e-3];
const WIDTH_DEG: (f64, f64) = (1.5, 3.0);
const SPEED_FACTOR: (f64, f64) = (0.6, 1.4);
const WRAP_MARGIN_DEG: f64 = 4.0 * WIDTH_DEG.1;
const BUMP_STREAM: u64 = u64::MAX;

pub fn brightness_temperature(t: f64, q: f64) -> f64 {
    0.9 * t + 2000.0 * q + 15.0
}

pub fn bending_angle(t: f64, q: f64) -> f64 {
    0.02 + 5.0 * q - 1e-4 * (t - 255.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl Region {
    pub fn height(&self) -> f64 {
        self.lat_max - self.lat_min
    }

    pub fn width(&self) -> f64 {
        self.lon_max - self.lon_min
    }
}

impl Default for Region {
    fn default() -> Self {
        Self {
            lat_min: 30.0,
            lat_max: 50.0,
            lon_min: 115.0,
            lon_max: 140.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub seed: u64,
    pub region: Region,
    pub n_bumps: usize,
    /// Degrees of longitude per time step.
    pub advection_speed: f64,
    /// Observation noise standard deviation, indexed by [`Variable::index`].
    pub noise_sd: [f64; 6],
    /// Degrees. Latitude neighbours fall outside a 50 km radius above 0.4496.
    pub grid_spacing: f64,
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            region: Region::default(),
            n_bumps: 12,
            advection_speed: 1.0,
            noise_sd: [1.0, 1.0, 0.5, 1.0e-4, 0.5, 1.0e-4],
            grid_spacing: 0.44,
        }
    }
}

impl FieldSpec {
    pub fn validate(&self) -> Result<()> {
        let r = &self.region;
        if self.n_bumps == 0 {
            return Err(Error::InvalidSpec("n_bumps must be at least 1".into()));
        }
        if self.noise_sd.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidSpec(
                "noise_sd must be finite and >= 0".into(),
            ));
        }
        if !(r.lat_max > r.lat_min && r.lon_max > r.lon_min) {
            return Err(Error::InvalidSpec("region box is degenerate".into()));
        }
        if !(r.lat_min >= -90.0 && r.lat_max <= 90.0 && r.lon_min >= -180.0 && r.lon_max < 180.0) {
            return Err(Error::InvalidSpec(
                "region outside valid coordinates".into(),
            ));
        }
        if !(self.grid_spacing > 0.0) || !self.advection_speed.is_finite() {
            return Err(Error::InvalidSpec(
                "grid spacing must be positive and advection finite".into(),
            ));
        }
        Ok(())
    }

    pub fn noise(&self, v: Variable) -> f64 {
        self.noise_sd[v.index()]
    }

    /// Bump parameters of one state variable, drawn from the seed alone.
    pub fn bumps(&self, v: Variable) -> Vec<Bump> {
        let slot = Variable::STATE
            .iter()
            .position(|&s| s == v)
            .expect("bumps exist only for U, V, T, Q");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(BUMP_STREAM);
        let r = &self.region;
        // Draw all variables in a fixed order so each variable's bumps are stable.
        let mut all = Vec::with_capacity(4 * self.n_bumps);
        for scale in AMPLITUDE {
            for _ in 0..self.n_bumps {
                all.push(Bump {
                    lat: rng.random_range(r.lat_min..r.lat_max),
                    lon0: rng.random_range(r.lon_min..r.lon_max),
                    width: rng.random_range(WIDTH_DEG.0..WIDTH_DEG.1),
                    amplitude: scale * rng.random_range(-1.0..1.0),
                    speed: rng.random_range(SPEED_FACTOR.0..SPEED_FACTOR.1),
                });
            }
        }
        all.drain(slot * self.n_bumps..(slot + 1) * self.n_bumps)
            .collect()
    }

    /// Evaluable fields at time step `t`.
    pub fn fields(&self, t: i64) -> Fields {
        gen_fields(self, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub lat: f64,
    pub lon0: f64,
    pub width: f64,
    pub amplitude: f64,
    pub speed: f64,
}

impl Bump {
    pub fn lon_at(&self, region: &Region, advection: f64, t: i64) -> f64 {
        let west = region.lon_min - WRAP_MARGIN_DEG;
        let period = region.width() + 2.0 * WRAP_MARGIN_DEG;
        west + (self.lon0 - west + self.speed * advection * t as f64).rem_euclid(period)
    }
}

/// The six fields frozen at one time step.
#[derive(Debug, Clone)]
pub struct Fields {
    /// (lat, lon_at_t, width, amplitude) per bump per state variable.
    bumps: [Vec<(f64, f64, f64, f64)>; 4],
}

impl Fields {
    fn state(&self, slot: usize, lat: f64, lon: f64) -> f64 {
        BASE[slot]
            + self.bumps[slot]
                .iter()
                .map(|&(blat, blon, w, a)| {
                    let r2 = (lat - blat).powi(2) + (lon - blon).powi(2);
                    a * (-r2 / (2.0 * w * w)).exp()
                })
                .sum::<f64>()
    }

    pub fn value(&self, v: Variable, lat: f64, lon: f64) -> f64 {
        match v {
            Variable::U => self.state(0, lat, lon),
            Variable::V => self.state(1, lat, lon),
            Variable::T => self.state(2, lat, lon),
            Variable::Q => self.state(3, lat, lon),
            Variable::Tb => {
                brightness_temperature(self.state(2, lat, lon), self.state(3, lat, lon))
            }
            Variable::Ba => bending_angle(self.state(2, lat, lon), self.state(3, lat, lon)),
        }
    }

    pub fn values(&self, vars: &[Variable], p: GeoPoint) -> Vec<f64> {
        vars.iter().map(|&v| self.value(v, p.lat, p.lon)).collect()
    }
}

pub fn gen_fields(spec: &FieldSpec, t: i64) -> Fields {
    let bumps = Variable::STATE.map(|v| {
        spec.bumps(v)
            .iter()
            .map(|b| {
                (
                    b.lat,
                    b.lon_at(&spec.region, spec.advection_speed, t),
                    b.width,
                    b.amplitude,
                )
            })
            .collect()
    });
    Fields { bumps }
}

/// Regular grid points covering the region, row-major from the south-west corner.
pub fn grid_points(spec: &FieldSpec) -> Vec<GeoPoint> {
    let r = &spec.region;
    let rows = (r.height() / spec.grid_spacing + 1e-9).floor() as usize + 1;
    let cols = (r.width() / spec.grid_spacing + 1e-9).floor() as usize + 1;
    let mut points = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            points.push(GeoPoint::new(
                r.lat_min + i as f64 * spec.grid_spacing,
                r.lon_min + j as f64 * spec.grid_spacing,
            ));
        }
    }
    points
}

/// NWP nodes with attributes from the field at `t - 1` and labels from `t`.
pub fn sample_nwp_grid(spec: &FieldSpec, t: i64, first_id: u64) -> (Vec<MetNode>, Vec<[f64; 4]>) {
    let prev = gen_fields(spec, t - 1);
    let now = gen_fields(spec, t);
    let vars = NodeKind::Nwp.variables();
    grid_points(spec)
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let node = MetNode {
                id: NodeId(first_id + i as u64),
                kind: NodeKind::Nwp,
                location: p,
                time_index: t,
                attributes: prev.values(vars, p),
            };
            let label = Variable::STATE.map(|v| now.value(v, p.lat, p.lon));
            (node, label)
        })
        .unzip()
}

/// Number of observations per kind, indexed like [`NodeKind::OBSERVATIONS`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObsCounts(pub [usize; 11]);

impl ObsCounts {
    pub fn uniform(n: usize) -> Self {
        Self([n; 11])
    }

    pub fn get(&self, kind: NodeKind) -> usize {
        NodeKind::OBSERVATIONS
            .iter()
            .position(|&k| k == kind)
            .map_or(0, |i| self.0[i])
    }

    pub fn set(&mut self, kind: NodeKind, n: usize) {
        if let Some(i) = NodeKind::OBSERVATIONS.iter().position(|&k| k == kind) {
            self.0[i] = n;
        }
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

impl Default for ObsCounts {
    fn default() -> Self {
        Self::uniform(20)
    }
}

/// Observations at time `t`: uniform locations, field values plus Gaussian noise.
pub fn sample_observations(
    spec: &FieldSpec,
    t: i64,
    counts: &ObsCounts,
    first_id: u64,
) -> Vec<MetNode> {
    let fields = gen_fields(spec, t);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(t as u64);
    let r = spec.region;
    let mut next_id = first_id;
    let mut nodes = Vec::with_capacity(counts.total());
    for kind in NodeKind::OBSERVATIONS {
        for _ in 0..counts.get(kind) {
            let p = GeoPoint::new(
                rng.random_range(r.lat_min..r.lat_max),
                rng.random_range(r.lon_min..r.lon_max),
            );
            let attributes = kind
                .variables()
                .iter()
                .map(|&v| {
                    let clean = fields.value(v, p.lat, p.lon);
                    let sd = spec.noise(v);
                    if sd > 0.0 {
                        clean + Normal::new(0.0, sd).expect("sd >= 0").sample(&mut rng)
                    } else {
                        clean
                    }
                })
                .collect();
            nodes.push(MetNode {
                id: NodeId(next_id),
                kind,
                location: p,
                time_index: t,
                attributes,
            });
            next_id += 1;
        }
    }
    nodes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeStep {
    pub time: i64,
    pub nwp: Vec<MetNode>,
    /// (U, V, T, Q) at `time`, parallel to `nwp`.
    pub labels: Vec<[f64; 4]>,
    pub observations: Vec<MetNode>,
}

impl TimeStep {
    pub fn node_count(&self) -> usize {
        self.nwp.len() + self.observations.len()
    }

    pub fn all_nodes(&self) -> impl Iterator<Item = &MetNode> {
        self.nwp.iter().chain(&self.observations)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub split: Split,
    pub steps: Vec<TimeStep>,
}

/// Generates consecutive time steps `times`, assigning globally increasing ids
/// starting at `first_id`.
pub fn generate(
    spec: &FieldSpec,
    times: impl IntoIterator<Item = i64>,
    counts: &ObsCounts,
    split: Split,
    first_id: u64,
) -> Result<Dataset> {
    spec.validate()?;
    let mut next_id = first_id;
    let mut steps = Vec::new();
    for t in times {
        let (nwp, labels) = sample_nwp_grid(spec, t, next_id);
        next_id += nwp.len() as u64;
        let observations = sample_observations(spec, t, counts, next_id);
        next_id += observations.len() as u64;
        steps.push(TimeStep {
            time: t,
            nwp,
            labels,
            observations,
        });
    }
    Ok(Dataset { split, steps })
}

/// Train and test splits for `train_steps` then `test_steps` consecutive steps.
pub fn generate_split(
    spec: &FieldSpec,
    counts: &ObsCounts,
    train_steps: usize,
    test_steps: usize,
) -> Result<(Dataset, Dataset)> {
    let train_end = 1 + train_steps as i64;
    let train = generate(spec, 1..train_end, counts, Split::Train, 0)?;
    let first_test_id = train
        .steps
        .iter()
        .map(|s| s.node_count() as u64)
        .sum::<u64>();
    let test = generate(
        spec,
        train_end..train_end + test_steps as i64,
        counts,
        Split::Test,
        first_test_id,
    )?;
    Ok((train, test))
}

fn join_values(values: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        write!(out, "{v}").unwrap();
    }
    out
}

pub fn dataset_to_string(d: &Dataset) -> String {
    let mut out = String::new();
    writeln!(out, "{DATASET_MAGIC}").unwrap();
    writeln!(out, "# split = {}", d.split.name()).unwrap();
    writeln!(out, "{HEADER}").unwrap();
    for step in &d.steps {
        for (node, label) in step.nwp.iter().zip(&step.labels) {
            write_line(&mut out, node, "attr", &node.attributes);
            write_line(&mut out, node, "label", label);
        }
        for node in &step.observations {
            write_line(&mut out, node, "attr", &node.attributes);
        }
    }
    out
}

fn write_line(out: &mut String, node: &MetNode, role: &str, values: &[f64]) {
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        node.id,
        node.kind,
        node.location.lat,
        node.location.lon,
        node.time_index,
        role,
        join_values(values)
    )
    .unwrap();
}

pub fn save_dataset(path: impl AsRef<Path>, d: &Dataset) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dataset_to_string(d)).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, column: usize, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(line, column, format!("invalid {what} {s:?}")))
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim_end() == DATASET_MAGIC => {}
        _ => return Err(Error::parse(1, 1, format!("expected {DATASET_MAGIC:?}"))),
    }

    let mut split = Split::Train;
    let mut seen_header = false;
    let mut steps: Vec<TimeStep> = Vec::new();
    // Position of each NWP node within its step, for attaching labels.
    let mut nwp_pos: std::collections::HashMap<NodeId, (usize, usize)> = Default::default();
    let mut labels: Vec<Vec<Option<[f64; 4]>>> = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();

    for (ln, raw) in lines {
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(value) = comment.trim().strip_prefix("split") {
                let value = value.trim_start().trim_start_matches('=').trim();
                split = match value {
                    "train" => Split::Train,
                    "test" => Split::Test,
                    other => return Err(Error::parse(ln, 1, format!("unknown split {other:?}"))),
                };
            }
            continue;
        }
        if !seen_header {
            if line != HEADER {
                return Err(Error::parse(ln, 1, format!("expected header {HEADER:?}")));
            }
            seen_header = true;
            continue;
        }

        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(Error::parse(
                ln,
                cols.len().min(7) + 1,
                format!("expected 7 columns, found {}", cols.len()),
            ));
        }
        let id = NodeId(parse_field(cols[0], ln, 1, "id")?);
        let kind: NodeKind = cols[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(ln, 2, format!("unknown node kind {:?}", cols[1])))?;
        let lat: f64 = parse_field(cols[2], ln, 3, "lat")?;
        let lon: f64 = parse_field(cols[3], ln, 4, "lon")?;
        let location = GeoPoint::new(lat, lon);
        if !location.is_valid() {
            return Err(Error::parse(ln, 3, "coordinates out of range"));
        }
        let time: i64 = parse_field(cols[4], ln, 5, "time")?;
        let values = cols[6]
            .split(';')
            .map(|v| parse_field::<f64>(v, ln, 7, "value"))
            .collect::<Result<Vec<_>>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(ln, 7, "non-finite value"));
        }

        match cols[5].trim() {
            "attr" => {
                let node = MetNode::new(id, kind, location, time, values)
                    .map_err(|e| Error::parse(ln, 7, e.to_string()))?;
                if !seen_ids.insert(id) {
                    return Err(Error::parse(ln, 1, format!("duplicate node id {id}")));
                }
                let si = match steps.iter().position(|s| s.time == time) {
                    Some(i) => i,
                    None => {
                        steps.push(TimeStep {
                            time,
                            nwp: Vec::new(),
                            labels: Vec::new(),
                            observations: Vec::new(),
                        });
                        labels.push(Vec::new());
                        steps.len() - 1
                    }
                };
                if kind == NodeKind::Nwp {
                    nwp_pos.insert(id, (si, steps[si].nwp.len()));
                    steps[si].nwp.push(node);
                    labels[si].push(None);
                } else {
                    steps[si].observations.push(node);
                }
            }
            "label" => {
                if kind != NodeKind::Nwp {
                    return Err(Error::parse(ln, 6, "labels are only valid for NWP nodes"));
                }
                let label: [f64; 4] = values.as_slice().try_into().map_err(|_| {
                    Error::parse(ln, 7, format!("label needs 4 values, got {}", values.len()))
                })?;
                let &(si, ni) = nwp_pos
                    .get(&id)
                    .ok_or_else(|| Error::parse(ln, 1, format!("label for unknown node {id}")))?;
                if labels[si][ni].replace(label).is_some() {
                    return Err(Error::parse(ln, 1, format!("second label for node {id}")));
                }
            }
            other => return Err(Error::parse(ln, 6, format!("unknown role {other:?}"))),
        }
    }

    for (step, step_labels) in steps.iter_mut().zip(labels) {
        step.labels = step_labels
            .into_iter()
            .zip(&step.nwp)
            .map(|(l, n)| {
                l.ok_or_else(|| Error::parse(0, 0, format!("NWP node {} has no label", n.id)))
            })
            .collect::<Result<_>>()?;
    }
    Ok(Dataset { split, steps })
}
