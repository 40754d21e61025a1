//! Directed transmission weights and the per-node non-symmetry metrics.
//!
//! For a node `i` with degree `k_i` the metrics are
//!
//! * `D_i = Σ_j (w_ij - w_ji) / k_i`, positive when the node gives more than it receives;
//! * `P_i(d)`, the share of incident bonds whose difference `w_ij - w_ji` falls in bin `d`;
//! * `S_i = -Σ_d P_i(d) ln P_i(d)` (nats).
//!
//! Differences are binned on a grid of width `bin_width` whose bins are
//! centred on integer multiples of the width, so `0` is a bin centre.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::netgen::{BondKind, WeightedGraph};

pub const DEFAULT_BIN_WIDTH: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightPolicy {
    pub w_short: f64,
    pub w_long: f64,
}

impl WeightPolicy {
    pub fn uniform(w: f64) -> Self {
        WeightPolicy { w_short: w, w_long: w }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("w_short", self.w_short), ("w_long", self.w_long)] {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidParameter(format!("{name} = {w} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn weight_for(&self, kind: BondKind) -> f64 {
        match kind {
            BondKind::Short => self.w_short,
            BondKind::Long => self.w_long,
        }
    }
}

/// Sets both directions of every bond to the policy weight of its class.
pub fn assign_baseline_weights(graph: &WeightedGraph, policy: &WeightPolicy) -> Result<WeightedGraph> {
    policy.validate()?;
    let mut out = graph.clone();
    for b in graph.bonds() {
        let w = policy.weight_for(b.kind);
        out.set_weight(b.i, b.j, w)?;
        out.set_weight(b.j, b.i, w)?;
    }
    Ok(out)
}

/// Signed offsets added to one node's outgoing weights, one per bond in
/// ascending neighbor order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneitySpec {
    pub node: usize,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
    pub differences: Vec<f64>,
}

fn default_bin_width() -> f64 {
    DEFAULT_BIN_WIDTH
}

impl HeterogeneitySpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: HeterogeneitySpec = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        if !(spec.bin_width > 0.0 && spec.bin_width.is_finite()) {
            return Err(Error::Spec(format!("bin_width = {} must be positive", spec.bin_width)));
        }
        if let Some(d) = spec.differences.iter().find(|d| !d.is_finite()) {
            return Err(Error::Spec(format!("difference {d} is not finite")));
        }
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("spec serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

/// Outgoing weight on the `j`-th bond of `spec.node` becomes
/// `clamp(w + d_j, 0, 1)`; nothing else changes.
pub fn inject_heterogeneity(graph: &WeightedGraph, spec: &HeterogeneitySpec) -> Result<WeightedGraph> {
    if spec.node >= graph.n_nodes() {
        return Err(Error::Spec(format!("node {} does not exist", spec.node)));
    }
    let k = graph.degree(spec.node);
    if spec.differences.len() != k {
        return Err(Error::Spec(format!(
            "{} differences given for node {} of degree {k}",
            spec.differences.len(),
            spec.node
        )));
    }
    let mut out = graph.clone();
    for (nb, d) in graph.neighbors(spec.node).iter().zip(&spec.differences) {
        out.set_weight(spec.node, nb.node, (nb.weight + d).clamp(0.0, 1.0))?;
    }
    Ok(out)
}

/// Number of bonds of `spec.node` whose target weight would leave `[0, 1]`.
pub fn clamped_count(graph: &WeightedGraph, spec: &HeterogeneitySpec) -> usize {
    graph
        .neighbors(spec.node)
        .iter()
        .zip(&spec.differences)
        .filter(|(nb, d)| !(0.0..=1.0).contains(&(nb.weight + *d)))
        .count()
}

fn differences(graph: &WeightedGraph, node: usize) -> Result<Vec<f64>> {
    if node >= graph.n_nodes() {
        return Err(Error::InvalidParameter(format!("node {node} does not exist")));
    }
    if graph.degree(node) == 0 {
        return Err(Error::UndefinedMetric(node));
    }
    Ok(graph
        .neighbors(node)
        .iter()
        .map(|nb| {
            let back = graph.weight(nb.node, node).expect("bonds are symmetric");
            nb.weight - back
        })
        .collect())
}

/// D_i.
pub fn difference_measure(graph: &WeightedGraph, node: usize) -> Result<f64> {
    let diffs = differences(graph, node)?;
    Ok(diffs.iter().sum::<f64>() / diffs.len() as f64)
}

/// Bin index of `d`: bins are `[(m - 1/2) w, (m + 1/2) w)`.
pub fn bin_index(d: f64, bin_width: f64) -> i64 {
    (d / bin_width + 0.5).floor() as i64
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceDistribution {
    pub bin_width: f64,
    /// Bin index to probability mass; only nonempty bins are present.
    pub masses: BTreeMap<i64, f64>,
}

impl DifferenceDistribution {
    pub fn bin_center(&self, index: i64) -> f64 {
        index as f64 * self.bin_width
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.values().sum()
    }
}

/// P_i(d): each incident bond contributes `1 / k_i` to the bin of `w_ij - w_ji`.
pub fn difference_distribution(graph: &WeightedGraph, node: usize, bin_width: f64) -> Result<DifferenceDistribution> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::InvalidParameter(format!("bin_width = {bin_width} must be positive")));
    }
    let diffs = differences(graph, node)?;
    Ok(bin_differences(&diffs, bin_width))
}

fn bin_differences(diffs: &[f64], bin_width: f64) -> DifferenceDistribution {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &d in diffs {
        *counts.entry(bin_index(d, bin_width)).or_default() += 1;
    }
    let k = diffs.len() as f64;
    DifferenceDistribution {
        bin_width,
        masses: counts.into_iter().map(|(b, c)| (b, c as f64 / k)).collect(),
    }
}

/// Shannon entropy in nats; `0 ln 0 = 0`.
pub fn nodal_entropy(dist: &DifferenceDistribution) -> Result<f64> {
    if dist.masses.values().any(|&p| p.is_nan() || p < 0.0) {
        return Err(Error::Validation("negative or NaN mass in distribution".into()));
    }
    let total = dist.total_mass();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!("distribution sums to {total}, not 1")));
    }
    Ok(entropy_of(dist.masses.values().copied()))
}

fn entropy_of(masses: impl Iterator<Item = f64>) -> f64 {
    let s: f64 = masses.filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum();
    // a single full bin gives -1 ln 1 = -0.0
    s.max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeMetrics {
    pub d_value: f64,
    pub distribution: DifferenceDistribution,
    pub entropy: f64,
}

pub fn node_metrics(graph: &WeightedGraph, node: usize, bin_width: f64) -> Result<NodeMetrics> {
    let d_value = difference_measure(graph, node)?;
    let distribution = difference_distribution(graph, node, bin_width)?;
    let entropy = nodal_entropy(&distribution)?;
    Ok(NodeMetrics { d_value, distribution, entropy })
}

/// A difference multiset chosen for a target `(D, S)` pair, before clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct MultisetPlan {
    /// Ascending; assign in canonical edge order.
    pub differences: Vec<f64>,
    /// Multiplicity of each distinct level.
    pub multiplicities: Vec<usize>,
    pub planned_d: f64,
    pub planned_s: f64,
}

/// Builds a difference multiset of size `degree` aimed at mean `target_d`
/// and entropy `target_s`.
///
/// The generator family: `m <= max_levels` distinct levels one bin apart,
/// placed on bin centres around the target mean; the first level holds
/// `a` copies and the other `m - 1` share the remaining `degree - a` as
/// evenly as possible. Every `(m, a)` is scored by its entropy error and
/// the closest wins (fewest levels on ties). Levels are arranged
/// alternately above and below the centre, largest multiplicity first,
/// and the centre bin is chosen to bring the mean as close as possible to
/// `target_d`.
pub fn plan_difference_multiset(
    degree: usize,
    target_d: f64,
    target_s: f64,
    bin_width: f64,
    max_levels: usize,
) -> Result<MultisetPlan> {
    if degree == 0 {
        return Err(Error::Spec("cannot build a difference multiset for a degree-0 node".into()));
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::InvalidParameter(format!("bin_width = {bin_width} must be positive")));
    }
    if !target_d.is_finite() || !(target_s >= 0.0 && target_s.is_finite()) {
        return Err(Error::InvalidParameter(format!("bad targets D = {target_d}, S = {target_s}")));
    }
    let max_levels = max_levels.clamp(1, degree);
    let k = degree as f64;

    let mut best: Option<(f64, Vec<usize>)> = None;
    for m in 1..=max_levels {
        let min_dominant = degree.div_ceil(m);
        for a in min_dominant..=degree - (m - 1) {
            let rest = degree - a;
            let mut counts = vec![a];
            if m > 1 {
                let base = rest / (m - 1);
                let extra = rest % (m - 1);
                counts.extend((0..m - 1).map(|i| base + usize::from(i < extra)));
            }
            let s = entropy_of(counts.iter().map(|&c| c as f64 / k));
            let err = (s - target_s).abs();
            if best.as_ref().is_none_or(|(e, _)| err < *e - 1e-15) {
                best = Some((err, counts));
            }
        }
    }
    let (_, mut counts) = best.expect("at least one candidate");
    counts.sort_unstable_by(|a, b| b.cmp(a));

    // offsets 0, +1, -1, +2, -2, ... in bins
    let offsets: Vec<i64> = (0..counts.len() as i64)
        .map(|i| if i % 2 == 1 { (i + 1) / 2 } else { -(i / 2) })
        .collect();
    let offset_sum: i64 = counts.iter().zip(&offsets).map(|(&c, &o)| c as i64 * o).sum();
    let mean_offset = offset_sum as f64 / k;
    let center = (target_d / bin_width - mean_offset).round() as i64;

    let mut levels: Vec<(i64, usize)> = offsets.iter().map(|&o| center + o).zip(counts.iter().copied()).collect();
    levels.sort_unstable();
    let differences = levels
        .iter()
        .flat_map(|&(bin, c)| std::iter::repeat_n(bin as f64 * bin_width, c))
        .collect();
    let multiplicities = levels.iter().map(|&(_, c)| c).collect::<Vec<_>>();
    let planned_s = entropy_of(multiplicities.iter().map(|&c| c as f64 / k));
    let bin_sum: i64 = levels.iter().map(|&(b, c)| b * c as i64).sum();
    Ok(MultisetPlan {
        differences,
        multiplicities,
        planned_d: bin_sum as f64 / k * bin_width,
        planned_s,
    })
}
