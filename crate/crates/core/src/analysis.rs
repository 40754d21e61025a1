//! Outcome metrics and walker-density bounds.
//!
//! Density bounds are expressed on the scale `walkers / Σ_j k_j`, on which a
//! node starts at `t_max * k_i / Σ_j k_j`. The checker works on integer
//! walker counts so comparisons are exact.
//!
//! The closed-form bounds are stated for the end of an experiment
//! (`t = t_max`). To check every intermediate step, the checker uses the
//! envelopes that track the initial endowment `t_max * k` separately from
//! the elapsed time `t`:
//!
//! ```text
//! lower(t) = (t_max - ceil(t/2)) k + floor(t/2)
//! upper(t) = (t_max - ceil((t-3)/2)) k_max + ceil((t-2)/2) k_max^2      (t >= 3)
//! ```
//!
//! Both coincide with [`bound_lower`] / [`bound_upper`] at `t = t_max`.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::engine::{InfectionTrace, RunRecord, TransferMatrix};
use crate::error::{Error, Result};
use crate::netgen::WeightedGraph;

pub const DEFAULT_PR_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeMetrics {
    pub pr: f64,
    pub diam: f64,
    pub extinct_at: Option<usize>,
    pub outbreak: bool,
    pub pr_threshold: f64,
}

/// Fraction of nodes infected at least once in `[0, t]`.
pub fn participation_ratio(trace: &InfectionTrace, n_nodes: usize, t: usize) -> Result<f64> {
    if n_nodes != trace.n_nodes() {
        return Err(Error::Validation(format!("trace has {} nodes, {n_nodes} given", trace.n_nodes())));
    }
    let ever = trace.ever_infected_through(t)?;
    Ok(ever.iter().filter(|&&x| x).count() as f64 / n_nodes as f64)
}

/// Largest Euclidean distance from the seed to any node infected in `[0, t]`.
pub fn diameter(trace: &InfectionTrace, positions: &[[f64; 2]], seed_node: usize, t: usize) -> Result<f64> {
    if positions.len() != trace.n_nodes() || seed_node >= positions.len() {
        return Err(Error::Validation("positions, trace and seed node disagree".into()));
    }
    let ever = trace.ever_infected_through(t)?;
    let origin = positions[seed_node];
    Ok(ever
        .iter()
        .zip(positions)
        .filter(|(&e, _)| e)
        .map(|(_, &p)| crate::netgen::euclid(origin, p))
        .fold(0.0, f64::max))
}

pub fn outbreak_classify(metrics: &OutcomeMetrics, pr_threshold: f64) -> bool {
    metrics.pr > pr_threshold
}

/// Metrics at the last recorded step of a run.
pub fn outcome_metrics(record: &RunRecord, graph: &WeightedGraph, pr_threshold: f64) -> Result<OutcomeMetrics> {
    outcome_metrics_from_trace(&record.trace, graph, record.initial_node, pr_threshold)
}

/// Same, from a bare trace; the extinction step is the first step without infected nodes.
pub fn outcome_metrics_from_trace(
    trace: &InfectionTrace,
    graph: &WeightedGraph,
    seed_node: usize,
    pr_threshold: f64,
) -> Result<OutcomeMetrics> {
    let t = trace.last_time().ok_or(Error::Range { t: 0, last: 0 })?;
    let pr = participation_ratio(trace, graph.n_nodes(), t)?;
    let diam = diameter(trace, graph.positions(), seed_node, t)?;
    let extinct_at = trace.steps().iter().position(|s| s.is_empty());
    let mut m = OutcomeMetrics { pr, diam, extinct_at, outbreak: false, pr_threshold };
    m.outbreak = outbreak_classify(&m, pr_threshold);
    Ok(m)
}

/// `(1/Σk) [ (t - ceil(t/2)) k + floor(t/2) ]`; with `k = k_max` this is the
/// end-of-experiment lower bound for `t = t_max`.
pub fn bound_lower(t: usize, k: usize, sum_k: usize) -> f64 {
    lower_envelope(t, t, k) as f64 / sum_k as f64
}

/// `(1/Σk) [ (t - ceil((t-3)/2)) k_max + ceil((t-2)/2) k_max^2 ]`, claimed for `t >= 3`.
pub fn bound_upper(t: usize, k_max: usize, sum_k: usize) -> Result<f64> {
    Ok(upper_envelope(t, t, k_max)? as f64 / sum_k as f64)
}

fn ceil_half(x: i64) -> i64 {
    x.div_euclid(2) + x.rem_euclid(2)
}

/// Least walker count the extremal lower schedule leaves on a degree-`k`
/// node after `t` steps of a `t_max` experiment.
pub fn lower_envelope(t: usize, t_max: usize, k: usize) -> i64 {
    let (t, t_max, k) = (t as i64, t_max as i64, k as i64);
    (t_max - ceil_half(t)) * k + t.div_euclid(2)
}

/// Largest walker count the extremal upper schedule accumulates after `t >= 3` steps.
pub fn upper_envelope(t: usize, t_max: usize, k_max: usize) -> Result<i64> {
    if t < 3 {
        return Err(Error::Domain(format!("the upper bound is only claimed for t >= 3 (got t = {t})")));
    }
    let (t, t_max, k) = (t as i64, t_max as i64, k_max as i64);
    Ok((t_max - ceil_half(t - 3)) * k + ceil_half(t - 2) * k * k)
}

/// Both bounds for one graph and horizon, on the `walkers / Σk` scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundEnvelope {
    pub t_max: usize,
    pub k_max: usize,
    pub sum_k: usize,
}

impl BoundEnvelope {
    pub fn for_graph(graph: &WeightedGraph, t_max: usize) -> Self {
        BoundEnvelope { t_max, k_max: graph.k_max(), sum_k: graph.degree_sum() }
    }

    /// Degree-refined lower envelope for a node of degree `k`.
    pub fn lower(&self, t: usize, k: usize) -> f64 {
        lower_envelope(t, self.t_max, k) as f64 / self.sum_k as f64
    }

    pub fn upper(&self, t: usize) -> Result<f64> {
        Ok(upper_envelope(t, self.t_max, self.k_max)? as f64 / self.sum_k as f64)
    }

    /// Largest one-step change, `(k_max^2 + k_max) / Σk`.
    pub fn step_change(&self) -> f64 {
        (self.k_max * self.k_max + self.k_max) as f64 / self.sum_k as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// |Δ walkers| <= k_max^2 + k_max.
    StepChange,
    /// Susceptible nodes never lose walkers.
    SusceptibleLoss,
    /// walkers(t) >= t_max k - k * (#infected steps before t) + (#infections in [1, t]).
    TraceFloor,
    /// Lower envelope with the node's own degree.
    RefinedLower,
    /// Lower envelope with k_max, on nodes of maximum degree.
    PaperLower,
    /// Upper envelope with k_max, on regular graphs, t >= 3.
    PaperUpper,
}

impl BoundKind {
    pub const ALL: [BoundKind; 6] = [
        BoundKind::StepChange,
        BoundKind::SusceptibleLoss,
        BoundKind::TraceFloor,
        BoundKind::RefinedLower,
        BoundKind::PaperLower,
        BoundKind::PaperUpper,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::StepChange => "step-change",
            BoundKind::SusceptibleLoss => "susceptible-loss",
            BoundKind::TraceFloor => "trace-floor",
            BoundKind::RefinedLower => "refined-lower",
            BoundKind::PaperLower => "kmax-lower",
            BoundKind::PaperUpper => "kmax-upper",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundViolation {
    pub kind: BoundKind,
    pub node: usize,
    pub t: usize,
    /// Observed walker count (or change, for `StepChange`).
    pub observed: i64,
    /// The bound it crossed, in walkers.
    pub bound: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoundReport {
    pub checked: BTreeMap<BoundKind, u64>,
    pub violations: Vec<BoundViolation>,
}

impl BoundReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violation_count(&self, kind: BoundKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn checked_count(&self, kind: BoundKind) -> u64 {
        self.checked.get(&kind).copied().unwrap_or(0)
    }

    pub fn merge(&mut self, other: BoundReport) {
        for (k, c) in other.checked {
            *self.checked.entry(k).or_default() += c;
        }
        self.violations.extend(other.violations);
    }

    fn check(&mut self, kind: BoundKind, ok: bool, node: usize, t: usize, observed: i64, bound: i64) {
        *self.checked.entry(kind).or_default() += 1;
        if !ok {
            self.violations.push(BoundViolation { kind, node, t, observed, bound });
        }
    }

    /// Plain-text listing, one line per kind and one per violation.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for kind in BoundKind::ALL {
            out.push_str(&format!(
                "{kind}: checked {} violations {}\n",
                self.checked_count(kind),
                self.violation_count(kind)
            ));
        }
        for v in &self.violations {
            out.push_str(&format!(
                "violation {} node {} t {} observed {} bound {}\n",
                v.kind, v.node, v.t, v.observed, v.bound
            ));
        }
        out
    }
}

/// Checks every node and step of a recorded run against the bounds.
pub fn check_bounds(record: &RunRecord, graph: &WeightedGraph) -> Result<BoundReport> {
    let history = record
        .history
        .as_ref()
        .ok_or_else(|| Error::Validation("run was recorded without walker history".into()))?;
    check_bounds_history(history, &record.trace, record.final_state.t_max(), graph)
}

/// [`check_bounds`] on raw walker counts `history[t][i]` and the matching trace.
pub fn check_bounds_history(
    history: &[Vec<u64>],
    trace: &InfectionTrace,
    t_max: usize,
    graph: &WeightedGraph,
) -> Result<BoundReport> {
    if history.len() != trace.len() {
        return Err(Error::Validation(format!("history has {} steps, trace has {}", history.len(), trace.len())));
    }
    if history.iter().any(|w| w.len() != graph.n_nodes()) || trace.n_nodes() != graph.n_nodes() {
        return Err(Error::Validation("history or trace does not match the graph size".into()));
    }
    let k_max = graph.k_max();
    let regular = graph.is_regular();
    let step_limit = (k_max * k_max + k_max) as i64;
    let degrees = graph.degrees();
    let mut report = BoundReport::default();
    let mut infected_steps = vec![0i64; graph.n_nodes()];
    let mut infections_after_start = vec![0i64; graph.n_nodes()];

    for t in 0..history.len() {
        let now = trace.indicator(t)?;
        if t >= 1 {
            let before = trace.indicator(t - 1)?;
            for i in 0..graph.n_nodes() {
                let k = degrees[i];
                let w = history[t][i] as i64;
                let prev = history[t - 1][i] as i64;
                report.check(BoundKind::StepChange, (w - prev).abs() <= step_limit, i, t, (w - prev).abs(), step_limit);
                if !before[i] {
                    report.check(BoundKind::SusceptibleLoss, w >= prev, i, t, w, prev);
                }
                if before[i] {
                    infected_steps[i] += 1;
                }
                if now[i] {
                    infections_after_start[i] += 1;
                }
                if k == 0 {
                    continue;
                }
                let floor = (t_max * k) as i64 - k as i64 * infected_steps[i] + infections_after_start[i];
                report.check(BoundKind::TraceFloor, w >= floor, i, t, w, floor);
                let lower = lower_envelope(t, t_max, k);
                report.check(BoundKind::RefinedLower, w >= lower, i, t, w, lower);
                if k == k_max {
                    let lower = lower_envelope(t, t_max, k_max);
                    report.check(BoundKind::PaperLower, w >= lower, i, t, w, lower);
                }
                if regular && t >= 3 {
                    let upper = upper_envelope(t, t_max, k_max)?;
                    report.check(BoundKind::PaperUpper, w <= upper, i, t, w, upper);
                }
            }
        }
    }
    Ok(report)
}

/// max_i |(T eta0)_i - eta0_i|; near zero when the initial density is
/// (almost) a fixed point of the transfer matrix.
pub fn non_outbreak_residual(transfer: &TransferMatrix, eta0: &[f64]) -> Result<f64> {
    let moved = transfer.mul_vec(eta0)?;
    Ok(moved.iter().zip(eta0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{build_transfer_matrix, initial_density, run, InfectionTrace, StopPolicy};
    use crate::netgen::{Bond, BondKind, GraphParams};
    use crate::weights::{assign_baseline_weights, WeightPolicy};
    use crate::SimRng;
    use rand::{Rng, SeedableRng};

    fn ring(n: usize, w: f64) -> WeightedGraph {
        let params = GraphParams { n_nodes: n, short_radius: 0.1, p_short: 0.0, long_radius: 0.5, p_long: 0.0, seed: 0 };
        let positions = (0..n)
            .map(|i| {
                let a = i as f64 / n as f64 * std::f64::consts::TAU;
                [0.5 + 0.4 * a.cos(), 0.5 + 0.4 * a.sin()]
            })
            .collect();
        let bonds = (0..n).map(|i| Bond { i, j: (i + 1) % n, kind: BondKind::Short });
        let g = WeightedGraph::from_bonds(params, positions, bonds).unwrap();
        assign_baseline_weights(&g, &WeightPolicy::uniform(w)).unwrap()
    }

    #[test]
    fn participation_and_diameter_basics() {
        let positions = [[0.0, 0.0], [1.0, 1.0], [0.5, 0.0]];
        let only_seed = InfectionTrace::from_indicators(&[vec![true, false, false], vec![false; 3]]).unwrap();
        assert_eq!(participation_ratio(&only_seed, 3, 1).unwrap(), 1.0 / 3.0);
        assert_eq!(diameter(&only_seed, &positions, 0, 1).unwrap(), 0.0);

        let all = InfectionTrace::from_indicators(&[vec![true, false, false], vec![false, true, true]]).unwrap();
        assert_eq!(participation_ratio(&all, 3, 1).unwrap(), 1.0);
        assert_eq!(diameter(&all, &positions, 0, 1).unwrap(), std::f64::consts::SQRT_2);
        assert_eq!(diameter(&all, &positions, 0, 0).unwrap(), 0.0);
        assert!(matches!(participation_ratio(&all, 3, 2), Err(Error::Range { t: 2, last: 1 })));
        assert!(matches!(diameter(&all, &positions, 0, 5), Err(Error::Range { .. })));
    }

    #[test]
    fn diameter_matches_naive_scan() {
        let mut rng = SimRng::seed_from_u64(5);
        let n = 60;
        let positions: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen(), rng.gen()]).collect();
        let steps: Vec<Vec<bool>> = (0..15).map(|_| (0..n).map(|_| rng.gen_bool(0.05)).collect()).collect();
        let trace = InfectionTrace::from_indicators(&steps).unwrap();
        let seed = 7;
        for t in 0..15 {
            let mut best: f64 = 0.0;
            for s in &steps[..=t] {
                for i in 0..n {
                    if s[i] {
                        let d = ((positions[i][0] - positions[seed][0]).powi(2) + (positions[i][1] - positions[seed][1]).powi(2)).sqrt();
                        best = best.max(d);
                    }
                }
            }
            assert!((diameter(&trace, &positions, seed, t).unwrap() - best).abs() < 1e-15);
        }
    }

    #[test]
    fn metrics_are_monotone_in_time() {
        let g = ring(30, 0.6);
        let rec = run(&g, 0, 40, &mut SimRng::seed_from_u64(1), StopPolicy::FullHorizon).unwrap();
        let mut last = (0.0, 0.0);
        for t in 0..rec.trace.len() {
            let pr = participation_ratio(&rec.trace, 30, t).unwrap();
            let d = diameter(&rec.trace, g.positions(), 0, t).unwrap();
            assert!(pr >= last.0 && d >= last.1);
            assert!(pr >= 1.0 / 30.0 && d <= std::f64::consts::SQRT_2);
            last = (pr, d);
        }
    }

    #[test]
    fn bound_formula_examples() {
        assert_eq!(bound_lower(1, 5, 17), 0.0);
        assert_eq!(bound_lower(4, 2, 6), 1.0);
        assert_eq!(bound_upper(3, 2, 6).unwrap(), 10.0 / 6.0);
        assert!(matches!(bound_upper(2, 2, 6), Err(Error::Domain(_))));
        for t in 3..=100 {
            for k in 1..=10 {
                assert!(bound_upper(t, k, 50).unwrap() >= bound_lower(t, k, 50));
                assert!(bound_lower(t, k, 50) >= 0.0);
            }
        }
    }

    #[test]
    fn outbreak_threshold() {
        let m = |pr| OutcomeMetrics { pr, diam: 0.0, extinct_at: None, outbreak: false, pr_threshold: 0.1 };
        assert!(!outbreak_classify(&m(1.0 / 500.0), 0.1));
        assert!(!outbreak_classify(&m(1.0 / 500.0), 0.01));
        assert!(outbreak_classify(&m(0.4), 0.1));
    }

    #[test]
    fn outbreak_counts_fall_with_threshold() {
        let g = ring(40, 0.7);
        let prs: Vec<f64> = (0..60)
            .map(|s| {
                let rec = run(&g, 0, 30, &mut SimRng::seed_from_u64(s), StopPolicy::AtExtinction).unwrap();
                outcome_metrics(&rec, &g, 0.1).unwrap().pr
            })
            .collect();
        let counts: Vec<usize> = [0.05, 0.10, 0.20]
            .iter()
            .map(|&th| {
                prs.iter()
                    .filter(|&&pr| outbreak_classify(&OutcomeMetrics { pr, diam: 0.0, extinct_at: None, outbreak: false, pr_threshold: th }, th))
                    .count()
            })
            .collect();
        // recount oracle
        for (c, th) in counts.iter().zip([0.05, 0.10, 0.20]) {
            assert_eq!(*c, prs.iter().filter(|&&p| p > th).count());
        }
        assert!(counts[0] >= counts[1] && counts[1] >= counts[2]);
    }

    #[test]
    fn zero_weight_runs_never_violate() {
        let g = ring(8, 0.0);
        let rec = run(&g, 3, 9, &mut SimRng::seed_from_u64(0), StopPolicy::FullHorizon).unwrap();
        let report = check_bounds(&rec, &g).unwrap();
        assert!(report.is_clean(), "{}", report.render());
        assert!(report.checked_count(BoundKind::PaperUpper) > 0);
    }

    #[test]
    fn residual_examples() {
        let g = ring(9, 0.2);
        let t = build_transfer_matrix(&g);
        let eta0 = initial_density(&g).unwrap();
        assert!(non_outbreak_residual(&t, &eta0).unwrap() < 1e-15);

        // two nodes, w01 = 0.09, w10 = 0.03: T = [[0,1],[1,0]], eta0 = (1/2, 1/2)
        let params = GraphParams { n_nodes: 2, short_radius: 0.1, p_short: 0.0, long_radius: 0.5, p_long: 0.0, seed: 0 };
        let mut two = WeightedGraph::from_bonds(params, vec![[0.0, 0.0], [0.05, 0.0]], [Bond { i: 0, j: 1, kind: BondKind::Short }]).unwrap();
        two.set_weight(0, 1, 0.09).unwrap();
        two.set_weight(1, 0, 0.03).unwrap();
        let t = build_transfer_matrix(&two);
        assert_eq!(non_outbreak_residual(&t, &[0.5, 0.5]).unwrap(), 0.0);
        // an uneven density is swapped: residual |0.7 - 0.3|
        assert!((non_outbreak_residual(&t, &[0.3, 0.7]).unwrap() - 0.4).abs() < 1e-15);
        assert!(non_outbreak_residual(&t, &[1.0]).is_err());
    }
}
