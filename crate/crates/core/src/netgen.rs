//! Geometric random / small-world graph generation and the graph file format.
//!
//! Nodes are points in the unit square. Pairs closer than the short radius
//! `r` become *short* bonds with probability `p_r`; pairs farther apart than
//! the long radius `R` become *long* bonds with probability `p_R`. Pairs at a
//! distance in `[r, R]` (ties included) are never bonded.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{sha256_hex, write_atomic};
use crate::SimRng;

/// Positions are stored with this many decimal digits so the text format
/// round-trips them bit-exactly.
pub const POSITION_DIGITS: usize = 12;
const POSITION_SCALE: f64 = 1e12;

pub const GRAPH_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BondKind {
    Short,
    Long,
}

impl BondKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BondKind::Short => "short",
            BondKind::Long => "long",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub n_nodes: usize,
    /// Short-distance radius.
    #[serde(rename = "r")]
    pub short_radius: f64,
    /// Short-bond formation probability.
    #[serde(rename = "p_r")]
    pub p_short: f64,
    /// Long-distance radius.
    #[serde(rename = "R")]
    pub long_radius: f64,
    /// Long-bond formation probability.
    #[serde(rename = "p_R")]
    pub p_long: f64,
    pub seed: u64,
}

impl GraphParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 {
            return Err(Error::EmptyPopulation);
        }
        for (name, p) in [("p_r", self.p_short), ("p_R", self.p_long)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        if !(self.short_radius.is_finite() && self.short_radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "r = {} must be positive",
                self.short_radius
            )));
        }
        if !(self.long_radius.is_finite() && self.long_radius >= self.short_radius) {
            return Err(Error::InvalidParameter(format!(
                "R = {} must be at least r = {}",
                self.long_radius, self.short_radius
            )));
        }
        Ok(())
    }

    /// Parameters whose bond probabilities are solved from target mean
    /// degrees, using the candidate pairs of the point set this seed produces.
    pub fn calibrated(
        n_nodes: usize,
        short_radius: f64,
        long_radius: f64,
        target_short_degree: f64,
        target_long_degree: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut params = GraphParams {
            n_nodes,
            short_radius,
            p_short: 0.0,
            long_radius,
            p_long: 0.0,
            seed,
        };
        params.validate()?;
        let positions = sample_positions(n_nodes, &mut SimRng::seed_from_u64(seed));
        let (short_pairs, long_pairs) = count_candidate_pairs(&positions, short_radius, long_radius);
        params.p_short = calibrate_probability(short_pairs, n_nodes, target_short_degree)?;
        params.p_long = calibrate_probability(long_pairs, n_nodes, target_long_degree)?;
        Ok(params)
    }
}

/// Bond probability giving `target_mean_degree` in expectation over `candidate_pairs` pairs.
pub fn calibrate_probability(candidate_pairs: usize, n_nodes: usize, target_mean_degree: f64) -> Result<f64> {
    if !(target_mean_degree >= 0.0 && target_mean_degree.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "target mean degree {target_mean_degree} must be finite and nonnegative"
        )));
    }
    if target_mean_degree == 0.0 {
        return Ok(0.0);
    }
    if candidate_pairs == 0 {
        return Err(Error::InvalidParameter(
            "no candidate pairs in this distance class; cannot reach a positive mean degree".into(),
        ));
    }
    // each bond adds 2 to the degree sum
    let p = target_mean_degree * n_nodes as f64 / (2.0 * candidate_pairs as f64);
    if p > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "target mean degree {target_mean_degree} needs bond probability {p:.4} > 1; enlarge the radius"
        )));
    }
    Ok(p)
}

/// Counts unordered pairs strictly closer than `short_radius` and strictly farther than `long_radius`.
pub fn count_candidate_pairs(positions: &[[f64; 2]], short_radius: f64, long_radius: f64) -> (usize, usize) {
    let mut short = 0;
    let mut long = 0;
    for (i, a) in positions.iter().enumerate() {
        for b in &positions[i + 1..] {
            let d = euclid(*a, *b);
            if d < short_radius {
                short += 1;
            } else if d > long_radius {
                long += 1;
            }
        }
    }
    (short, long)
}

fn quantize(x: f64) -> f64 {
    (x * POSITION_SCALE).round() / POSITION_SCALE
}

/// Uniform i.i.d. points in the unit square, quantized to [`POSITION_DIGITS`] decimals.
pub fn sample_positions<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| {
            let x: f64 = rng.gen();
            let y: f64 = rng.gen();
            [quantize(x), quantize(y)]
        })
        .collect()
}

pub fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub kind: BondKind,
}

/// One entry of a node's adjacency list; `weight` is the transmission
/// weight *from* the owning node *to* `node`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub node: usize,
    pub kind: BondKind,
    pub weight: f64,
}

/// Undirected bonds with directed transmission weights.
///
/// Adjacency lists are kept sorted by neighbor index; that order is the
/// canonical edge order used everywhere else in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    params: GraphParams,
    positions: Vec<[f64; 2]>,
    adjacency: Vec<Vec<Neighbor>>,
    degree_sum: usize,
    k_max: usize,
}

impl WeightedGraph {
    /// Builds a graph with all weights zero.
    pub fn from_bonds(
        params: GraphParams,
        positions: Vec<[f64; 2]>,
        bonds: impl IntoIterator<Item = Bond>,
    ) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::EmptyPopulation);
        }
        if params.n_nodes != n {
            return Err(Error::Validation(format!(
                "params.n_nodes = {} but {} positions given",
                params.n_nodes, n
            )));
        }
        for (i, p) in positions.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite() && (0.0..=1.0).contains(c)) {
                return Err(Error::Validation(format!(
                    "position of node {i} ({}, {}) is outside the unit square",
                    p[0], p[1]
                )));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = HashSet::new();
        for b in bonds {
            if b.i >= n || b.j >= n {
                return Err(Error::Validation(format!("bond ({}, {}) references a missing node", b.i, b.j)));
            }
            if b.i == b.j {
                return Err(Error::Validation(format!("self-loop at node {}", b.i)));
            }
            let key = (b.i.min(b.j), b.i.max(b.j));
            if !seen.insert(key) {
                return Err(Error::Validation(format!("duplicate bond ({}, {})", key.0, key.1)));
            }
            adjacency[b.i].push(Neighbor { node: b.j, kind: b.kind, weight: 0.0 });
            adjacency[b.j].push(Neighbor { node: b.i, kind: b.kind, weight: 0.0 });
        }
        for list in &mut adjacency {
            list.sort_by_key(|nb| nb.node);
        }
        let degree_sum = adjacency.iter().map(Vec::len).sum();
        let k_max = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        Ok(WeightedGraph { params, positions, adjacency, degree_sum, k_max })
    }

    pub fn params(&self) -> &GraphParams {
        &self.params
    }

    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> [f64; 2] {
        self.positions[i]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclid(self.positions[i], self.positions[j])
    }

    /// Neighbors of `i` in ascending index order.
    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    /// Σ_j k_j.
    pub fn degree_sum(&self) -> usize {
        self.degree_sum
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn avg_degree(&self) -> f64 {
        self.degree_sum as f64 / self.n_nodes() as f64
    }

    pub fn is_regular(&self) -> bool {
        self.adjacency.iter().all(|l| l.len() == self.k_max)
    }

    pub fn bond_count(&self) -> usize {
        self.degree_sum / 2
    }

    pub fn count_bonds(&self, kind: BondKind) -> usize {
        self.bonds().filter(|b| b.kind == kind).count()
    }

    /// Each undirected bond once, as `(i, j)` with `i < j`, ordered lexicographically.
    pub fn bonds(&self) -> impl Iterator<Item = Bond> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, list)| {
            list.iter()
                .filter(move |nb| nb.node > i)
                .map(move |nb| Bond { i, j: nb.node, kind: nb.kind })
        })
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        self.adjacency.get(i)?.binary_search_by_key(&j, |nb| nb.node).ok()
    }

    /// w_ij, or `None` when `{i, j}` is not a bond.
    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.slot(i, j).map(|s| self.adjacency[i][s].weight)
    }

    pub fn bond_kind(&self, i: usize, j: usize) -> Option<BondKind> {
        self.slot(i, j).map(|s| self.adjacency[i][s].kind)
    }

    /// Σ_{m ∈ Neigh_i} w_im.
    pub fn out_weight_sum(&self, i: usize) -> f64 {
        self.adjacency[i].iter().map(|nb| nb.weight).sum()
    }

    /// Sets w_ij. Fails if `{i, j}` is not a bond or `w` is outside `[0, 1]`.
    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Validation(format!("weight w_{i}{j} = {w} is outside [0, 1]")));
        }
        let s = self
            .slot(i, j)
            .ok_or_else(|| Error::Validation(format!("({i}, {j}) is not a bond")))?;
        self.adjacency[i][s].weight = w;
        Ok(())
    }

    /// Same positions and weights, long bonds dropped.
    pub fn without_long_bonds(&self) -> WeightedGraph {
        let mut params = self.params;
        params.p_long = 0.0;
        let mut g = WeightedGraph::from_bonds(
            params,
            self.positions.clone(),
            self.bonds().filter(|b| b.kind == BondKind::Short),
        )
        .expect("subgraph of a valid graph is valid");
        for (i, list) in self.adjacency.iter().enumerate() {
            for nb in list.iter().filter(|nb| nb.kind == BondKind::Short) {
                g.set_weight(i, nb.node, nb.weight).expect("weight already validated");
            }
        }
        g
    }

    /// SHA-256 of the canonical file encoding; equal graphs have equal fingerprints.
    pub fn fingerprint(&self) -> String {
        sha256_hex(to_json_string(self).as_bytes())
    }
}

/// Generates a graph from `params`: positions first, then one uniform draw
/// per in-class pair in `(i, j)` lexicographic order.
pub fn generate_graph(params: &GraphParams) -> Result<WeightedGraph> {
    params.validate()?;
    let mut rng = SimRng::seed_from_u64(params.seed);
    let positions = sample_positions(params.n_nodes, &mut rng);
    build(params, positions, &mut rng)
}

/// Like [`generate_graph`] but with explicit node positions (quantized on entry).
pub fn generate_graph_with_positions(params: &GraphParams, positions: &[[f64; 2]]) -> Result<WeightedGraph> {
    params.validate()?;
    if positions.len() != params.n_nodes {
        return Err(Error::InvalidParameter(format!(
            "{} pinned positions for n_nodes = {}",
            positions.len(),
            params.n_nodes
        )));
    }
    let mut rng = SimRng::seed_from_u64(params.seed);
    let positions = positions.iter().map(|p| [quantize(p[0]), quantize(p[1])]).collect();
    build(params, positions, &mut rng)
}

fn build(params: &GraphParams, positions: Vec<[f64; 2]>, rng: &mut SimRng) -> Result<WeightedGraph> {
    let n = positions.len();
    let mut bonds = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = euclid(positions[i], positions[j]);
            // the draw happens for every in-class pair so that p_R = 0 and
            // p_R > 0 graphs from one seed share their short bonds
            if d < params.short_radius {
                let u: f64 = rng.gen();
                if u < params.p_short {
                    bonds.push(Bond { i, j, kind: BondKind::Short });
                }
            } else if d > params.long_radius {
                let u: f64 = rng.gen();
                if u < params.p_long {
                    bonds.push(Bond { i, j, kind: BondKind::Long });
                }
            }
        }
    }
    WeightedGraph::from_bonds(*params, positions, bonds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeProfile {
    /// P(k) over observed degrees.
    pub histogram: BTreeMap<usize, f64>,
    pub mean: f64,
    pub k_max: usize,
}

pub fn degree_profile(graph: &WeightedGraph) -> DegreeProfile {
    let n = graph.n_nodes() as f64;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for k in graph.degrees() {
        *counts.entry(k).or_default() += 1;
    }
    let histogram: BTreeMap<usize, f64> = counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect();
    let mean = histogram.iter().map(|(&k, &p)| k as f64 * p).sum();
    DegreeProfile { histogram, mean, k_max: graph.k_max() }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    version: u32,
    params: GraphParams,
    positions: Vec<[f64; 2]>,
    edges: Vec<EdgeRecord>,
    weights: Vec<WeightRecord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    i: usize,
    j: usize,
    tag: BondKind,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightRecord {
    from: usize,
    to: usize,
    w: f64,
}

/// Canonical JSON encoding, one record per line.
pub fn to_json_string(graph: &WeightedGraph) -> String {
    let mut out = String::new();
    let params = serde_json::to_string(&graph.params).expect("params serialize");
    let _ = writeln!(out, "{{");
    let _ = writeln!(out, "  \"version\": {GRAPH_FILE_VERSION},");
    let _ = writeln!(out, "  \"params\": {params},");
    write_list(&mut out, "positions", graph.positions.iter(), |p| {
        format!("[{:.prec$}, {:.prec$}]", p[0], p[1], prec = POSITION_DIGITS)
    });
    out.push_str(",\n");
    write_list(&mut out, "edges", graph.bonds(), |b| {
        format!("{{\"i\": {}, \"j\": {}, \"tag\": \"{}\"}}", b.i, b.j, b.kind.as_str())
    });
    out.push_str(",\n");
    let directed = graph
        .adjacency
        .iter()
        .enumerate()
        .flat_map(|(i, list)| list.iter().map(move |nb| (i, nb.node, nb.weight)));
    write_list(&mut out, "weights", directed, |(i, j, w)| {
        let w = serde_json::to_string(&w).expect("finite weight");
        format!("{{\"from\": {i}, \"to\": {j}, \"w\": {w}}}")
    });
    out.push_str("\n}\n");
    out
}

fn write_list<T>(out: &mut String, key: &str, items: impl Iterator<Item = T>, fmt: impl Fn(T) -> String) {
    let _ = write!(out, "  \"{key}\": [");
    let mut first = true;
    for item in items {
        out.push_str(if first { "\n    " } else { ",\n    " });
        out.push_str(&fmt(item));
        first = false;
    }
    out.push_str(if first { "]" } else { "\n  ]" });
}

pub fn from_json_str(text: &str) -> Result<WeightedGraph> {
    let file: GraphFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    if file.version != GRAPH_FILE_VERSION {
        return Err(Error::Validation(format!("unsupported graph file version {}", file.version)));
    }
    file.params.validate()?;
    let bonds = file.edges.iter().map(|e| Bond { i: e.i, j: e.j, kind: e.tag });
    let mut graph = WeightedGraph::from_bonds(file.params, file.positions, bonds)?;
    let mut assigned = HashSet::new();
    for rec in &file.weights {
        if !assigned.insert((rec.from, rec.to)) {
            return Err(Error::Validation(format!("weight ({}, {}) given twice", rec.from, rec.to)));
        }
        graph.set_weight(rec.from, rec.to, rec.w)?;
    }
    if assigned.len() != graph.degree_sum() {
        return Err(Error::Validation(format!(
            "{} directed weights given, {} required (both directions of every bond)",
            assigned.len(),
            graph.degree_sum()
        )));
    }
    Ok(graph)
}

pub fn save_graph(graph: &WeightedGraph, path: &Path) -> Result<()> {
    write_atomic(path, to_json_string(graph).as_bytes())
}

pub fn load_graph(path: &Path) -> Result<WeightedGraph> {
    from_json_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn corners() -> Vec<[f64; 2]> {
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
    }

    fn k4_params() -> GraphParams {
        GraphParams { n_nodes: 4, short_radius: 1.5, p_short: 1.0, long_radius: 1.5, p_long: 0.0, seed: 7 }
    }

    #[test]
    fn pinned_corners_give_k4() {
        let g = generate_graph_with_positions(&k4_params(), &corners()).unwrap();
        assert_eq!(g.bond_count(), 6);
        assert_eq!(g.count_bonds(BondKind::Short), 6);
        assert!(g.degrees().iter().all(|&k| k == 3));
        assert_eq!(g.degree_sum(), 12);
        assert_eq!(g.k_max(), 3);
        assert!(g.is_regular());
    }

    #[test]
    fn zero_probabilities_give_no_edges() {
        let params = GraphParams { n_nodes: 200, short_radius: 0.2, p_short: 0.0, long_radius: 0.5, p_long: 0.0, seed: 1 };
        let g = generate_graph(&params).unwrap();
        assert_eq!(g.bond_count(), 0);
        assert_eq!(g.k_max(), 0);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = k4_params();
        p.n_nodes = 0;
        assert!(matches!(generate_graph(&p), Err(Error::EmptyPopulation)));
        let mut p = k4_params();
        p.p_short = 1.5;
        assert!(matches!(generate_graph(&p), Err(Error::InvalidParameter(_))));
        let mut p = k4_params();
        p.long_radius = 0.1;
        assert!(matches!(generate_graph(&p), Err(Error::InvalidParameter(_))));
        let mut p = k4_params();
        p.short_radius = 0.0;
        assert!(matches!(generate_graph(&p), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn distance_ties_are_not_bonded() {
        // unit spacing equals both radii exactly
        let params = GraphParams { n_nodes: 2, short_radius: 0.5, p_short: 1.0, long_radius: 0.5, p_long: 1.0, seed: 0 };
        let g = generate_graph_with_positions(&params, &[[0.0, 0.0], [0.5, 0.0]]).unwrap();
        assert_eq!(g.bond_count(), 0);
    }

    #[test]
    fn generation_is_deterministic() {
        let params = GraphParams { n_nodes: 300, short_radius: 0.1, p_short: 0.7, long_radius: 0.6, p_long: 0.01, seed: 99 };
        let a = generate_graph(&params).unwrap();
        let b = generate_graph(&params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = generate_graph(&GraphParams { seed: 100, ..params }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_long_probability_keeps_short_bonds() {
        let params = GraphParams { n_nodes: 300, short_radius: 0.1, p_short: 0.7, long_radius: 0.6, p_long: 0.02, seed: 5 };
        let sw = generate_graph(&params).unwrap();
        let plain = generate_graph(&GraphParams { p_long: 0.0, ..params }).unwrap();
        assert!(sw.count_bonds(BondKind::Long) > 0);
        assert_eq!(plain.count_bonds(BondKind::Long), 0);
        assert_eq!(sw.without_long_bonds(), plain);
    }

    #[test]
    fn short_bond_fraction_matches_probability() {
        // ≥ 10^4 candidate pairs; 99% binomial interval
        let p = 0.3;
        let params = GraphParams { n_nodes: 400, short_radius: 0.25, p_short: p, long_radius: 1.5, p_long: 0.0, seed: 11 };
        let g = generate_graph(&params).unwrap();
        let (candidates, _) = count_candidate_pairs(g.positions(), 0.25, 1.5);
        assert!(candidates >= 10_000, "only {candidates} candidates");
        let frac = g.bond_count() as f64 / candidates as f64;
        let sigma = (p * (1.0 - p) / candidates as f64).sqrt();
        assert!((frac - p).abs() < 2.576 * sigma, "fraction {frac} vs {p} (sigma {sigma})");
    }

    #[test]
    fn paper_scale_mean_degrees_hit_targets() {
        let seeds = 20;
        let (mut short_sum, mut long_sum) = (0.0, 0.0);
        for seed in 0..seeds {
            let params = GraphParams::calibrated(2000, 0.08, 0.5, 25.0, 0.09, seed).unwrap();
            let g = generate_graph(&params).unwrap();
            let n = g.n_nodes() as f64;
            let short = 2.0 * g.count_bonds(BondKind::Short) as f64 / n;
            assert!((short - 25.0).abs() < 2.5, "seed {seed}: short degree {short}");
            short_sum += short;
            long_sum += 2.0 * g.count_bonds(BondKind::Long) as f64 / n;
        }
        let short = short_sum / seeds as f64;
        let long = long_sum / seeds as f64;
        assert!((short - 25.0).abs() < 2.5, "mean short degree {short}");
        assert!((long - 0.09).abs() < 0.009, "mean long degree {long}");
    }

    #[test]
    fn calibration_rejects_unreachable_targets() {
        assert!(calibrate_probability(10, 100, 25.0).is_err());
        assert!(calibrate_probability(0, 100, 1.0).is_err());
        assert_eq!(calibrate_probability(0, 100, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn degree_profile_of_k4_and_empty() {
        let g = generate_graph_with_positions(&k4_params(), &corners()).unwrap();
        let prof = degree_profile(&g);
        assert_eq!(prof.histogram, BTreeMap::from([(3, 1.0)]));
        assert_eq!(prof.mean, 3.0);
        assert_eq!(prof.k_max, 3);

        let empty = generate_graph_with_positions(&GraphParams { p_short: 0.0, ..k4_params() }, &corners()).unwrap();
        let prof = degree_profile(&empty);
        assert_eq!(prof.histogram, BTreeMap::from([(0, 1.0)]));
        assert_eq!(prof.mean, 0.0);
    }

    fn poisson_pmf(lambda: f64, k: usize) -> f64 {
        let mut log_p = -lambda + k as f64 * lambda.ln();
        for i in 2..=k {
            log_p -= (i as f64).ln();
        }
        log_p.exp()
    }

    #[test]
    fn er_style_degrees_are_poisson() {
        // r = sqrt(2) makes every pair a short candidate
        let n = 1000;
        let p = 0.01;
        let params = GraphParams {
            n_nodes: n,
            short_radius: std::f64::consts::SQRT_2,
            p_short: p,
            long_radius: std::f64::consts::SQRT_2,
            p_long: 0.0,
            seed: 2024,
        };
        let g = generate_graph(&params).unwrap();
        let prof = degree_profile(&g);
        let total: f64 = prof.histogram.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mean_direct: f64 = g.degrees().iter().sum::<usize>() as f64 / n as f64;
        assert!((prof.mean - mean_direct).abs() < 1e-12);

        // bins: k <= 4, 5..=16 individually, k >= 17 -> 14 bins, df = 13
        let lambda = (n - 1) as f64 * p;
        let bin = |k: usize| k.clamp(4, 17) - 4;
        let mut observed = [0.0; 14];
        for k in g.degrees() {
            observed[bin(k)] += 1.0;
        }
        let mut expected = [0.0; 14];
        for k in 0..=200 {
            expected[bin(k)] += n as f64 * poisson_pmf(lambda, k);
        }
        let chi2: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
        // chi-square 0.999 quantile, 13 degrees of freedom
        assert!(chi2 < 34.53, "chi2 = {chi2}");
    }

    #[test]
    fn k4_round_trip_is_identical() {
        let mut g = generate_graph_with_positions(&k4_params(), &corners()).unwrap();
        g.set_weight(0, 1, 0.03).unwrap();
        g.set_weight(1, 0, 0.0625).unwrap();
        let text = to_json_string(&g);
        let back = from_json_str(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(to_json_string(&back), text);
    }

    #[test]
    fn paper_scale_round_trip() {
        let params = GraphParams::calibrated(2000, 0.08, 0.5, 25.0, 0.09, 3).unwrap();
        let g = generate_graph(&params).unwrap();
        let back = from_json_str(&to_json_string(&g)).unwrap();
        assert_eq!(back.fingerprint(), g.fingerprint());
        assert_eq!(back, g);
    }

    #[test]
    fn out_of_range_weight_is_rejected() {
        let g = generate_graph_with_positions(&k4_params(), &corners()).unwrap();
        let text = to_json_string(&g).replacen("\"w\": 0.0", "\"w\": 1.5", 1);
        assert!(matches!(from_json_str(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_file_reports_line() {
        let g = generate_graph_with_positions(&k4_params(), &corners()).unwrap();
        let text = to_json_string(&g).replacen("\"tag\": \"short\"", "\"tag\": short", 1);
        match from_json_str(&text) {
            Err(Error::Parse { line, .. }) => {
                let expected = text.lines().position(|l| l.contains("tag\": short")).unwrap() + 1;
                assert_eq!(line, expected);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_directed_weight_is_rejected() {
        let g = generate_graph_with_positions(&k4_params(), &corners()).unwrap();
        let text = to_json_string(&g);
        let lines: Vec<&str> = text.lines().collect();
        let last_w = lines.iter().rposition(|l| l.contains("\"from\"")).unwrap();
        let mut edited: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        edited.remove(last_w);
        let prev = &mut edited[last_w - 1];
        *prev = prev.trim_end_matches(',').to_string();
        assert!(matches!(from_json_str(&edited.join("\n")), Err(Error::Validation(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn bonds_respect_distance_classes(
            seed in any::<u64>(),
            n in 2usize..60,
            r in 0.05f64..0.6,
            gap in 0.0f64..0.6,
            p_r in 0.0f64..=1.0,
            p_big in 0.0f64..=1.0,
        ) {
            let params = GraphParams { n_nodes: n, short_radius: r, p_short: p_r, long_radius: r + gap, p_long: p_big, seed };
            let g = generate_graph(&params).unwrap();
            for b in g.bonds() {
                let d = g.distance(b.i, b.j);
                match b.kind {
                    BondKind::Short => prop_assert!(d < r),
                    BondKind::Long => prop_assert!(d > r + gap),
                }
            }
            let degrees = g.degrees();
            prop_assert_eq!(degrees.iter().sum::<usize>(), g.degree_sum());
            prop_assert_eq!(degrees.iter().copied().max().unwrap_or(0), g.k_max());
            for i in 0..n {
                for nb in g.neighbors(i) {
                    prop_assert!(g.weight(nb.node, i).is_some());
                }
            }
        }
    }
}
