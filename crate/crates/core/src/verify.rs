//! Invariant checks over repeated seeded runs on one graph.
//!
//! Every trial runs the stochastic engine for the full horizon and checks
//! the recorded walker history and infection trace against walker
//! conservation, density normalization, the infection rule, all bounds of
//! [`crate::analysis::check_bounds`] and the mean-flow master-equation
//! identity for the observed trace.

use std::collections::BTreeMap;

use rand::SeedableRng;
use serde::Serialize;

use crate::analysis::{check_bounds, BoundKind};
use crate::engine::{run, walkers_to_eta, MeanFlow, RunRecord, StopPolicy};
use crate::error::{Error, Result};
use crate::netgen::WeightedGraph;
use crate::seeds::{derive_seed, RUN_DOMAIN};
use crate::SimRng;

/// Master-equation and normalization tolerance.
pub const MEANFLOW_TOLERANCE: f64 = 1e-12;

/// Deliberate corruption of a recorded run, used as a negative control for
/// the checker itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// One walker disappears from the seed node after the first step.
    LeakWalker,
    /// Susceptible nodes that receive a walker are left susceptible.
    MissedInfection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantOutcome {
    pub name: String,
    pub checked: u64,
    pub failures: u64,
    /// Description of the first failure.
    pub example: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub trials: usize,
    pub t_max: usize,
    pub invariants: Vec<InvariantOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(|i| i.failures == 0)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.invariants.iter().filter(|i| i.failures > 0).map(|i| i.name.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&InvariantOutcome> {
        self.invariants.iter().find(|i| i.name == name)
    }

    pub fn render(&self) -> String {
        let mut out = format!("trials {} t_max {}\n", self.trials, self.t_max);
        for inv in &self.invariants {
            let status = if inv.failures == 0 { "ok" } else { "FAIL" };
            out.push_str(&format!("{status} {} checked {} failures {}", inv.name, inv.checked, inv.failures));
            if let Some(e) = &inv.example {
                out.push_str(&format!(" first: {e}"));
            }
            out.push('\n');
        }
        out.push_str(if self.passed() { "PASS\n" } else { "FAIL\n" });
        out
    }
}

#[derive(Default)]
struct Tally(BTreeMap<String, (u64, u64, Option<String>)>);

impl Tally {
    fn record(&mut self, name: &str, ok: bool, what: impl FnOnce() -> String) {
        let e = self.0.entry(name.to_string()).or_default();
        e.0 += 1;
        if !ok {
            e.1 += 1;
            if e.2.is_none() {
                e.2 = Some(what());
            }
        }
    }

    fn add(&mut self, name: &str, checked: u64, failures: u64, example: Option<String>) {
        let e = self.0.entry(name.to_string()).or_default();
        e.0 += checked;
        e.1 += failures;
        if e.2.is_none() {
            e.2 = example;
        }
    }
}

pub const WALKER_CONSERVATION: &str = "walker-conservation";
pub const DENSITY_NORMALIZATION: &str = "density-normalization";
pub const INFECTION_RULE: &str = "infection-rule";
pub const MASTER_EQUATION: &str = "master-equation";
pub const MEANFLOW_NORMALIZATION: &str = "meanflow-normalization";
pub const TRANSFER_COLUMNS: &str = "transfer-columns";

/// Runs `trials` seeded simulations of `t_max` steps and checks them.
/// Trial `i` starts from node `i mod n` with RNG seed
/// `derive_seed(rng_seed, [RUN_DOMAIN, i])`.
pub fn verify(graph: &WeightedGraph, t_max: usize, trials: usize, rng_seed: u64) -> Result<VerifyReport> {
    verify_with(graph, t_max, trials, rng_seed, Mutation::None)
}

pub fn verify_with(
    graph: &WeightedGraph,
    t_max: usize,
    trials: usize,
    rng_seed: u64,
    mutation: Mutation,
) -> Result<VerifyReport> {
    if graph.n_nodes() == 0 {
        return Err(Error::EmptyPopulation);
    }
    if graph.degree_sum() == 0 {
        return Err(Error::Validation("graph has no bonds; walker densities are undefined".into()));
    }
    let mut tally = Tally::default();
    let flow = MeanFlow::new(graph, t_max)?;
    let transfer = flow.transfer();
    for j in 0..transfer.dim() {
        let sum = transfer.column_sum(j);
        let expected = if transfer.is_zero_column(j) { 0.0 } else { 1.0 };
        tally.record(TRANSFER_COLUMNS, (sum - expected).abs() <= MEANFLOW_TOLERANCE, || {
            format!("column {j} sums to {sum}")
        });
    }

    for trial in 0..trials {
        let mut rng = SimRng::seed_from_u64(derive_seed(rng_seed, &[RUN_DOMAIN, trial as u64]));
        let mut record = run(graph, trial % graph.n_nodes(), t_max, &mut rng, StopPolicy::FullHorizon)?;
        mutate(&mut record, mutation)?;
        check_record(&record, graph, &flow, trial, &mut tally)?;
    }

    let mut invariants: Vec<InvariantOutcome> = tally
        .0
        .into_iter()
        .map(|(name, (checked, failures, example))| InvariantOutcome { name, checked, failures, example })
        .collect();
    // engine invariants first, then bounds in declaration order
    let rank = |name: &str| {
        [WALKER_CONSERVATION, DENSITY_NORMALIZATION, INFECTION_RULE, TRANSFER_COLUMNS, MASTER_EQUATION, MEANFLOW_NORMALIZATION]
            .iter()
            .position(|n| *n == name)
            .or_else(|| BoundKind::ALL.iter().position(|k| k.name() == name).map(|p| p + 100))
            .unwrap_or(usize::MAX)
    };
    invariants.sort_by_key(|i| rank(&i.name));
    Ok(VerifyReport { trials, t_max, invariants })
}

fn mutate(record: &mut RunRecord, mutation: Mutation) -> Result<()> {
    match mutation {
        Mutation::None => {}
        Mutation::LeakWalker => {
            if let Some(h) = record.history.as_mut().and_then(|h| h.get_mut(1)) {
                let seed = record.initial_node;
                h[seed] = h[seed].saturating_sub(1);
            }
        }
        Mutation::MissedInfection => {
            let mut steps: Vec<Vec<bool>> = (0..record.trace.len()).map(|t| record.trace.indicator(t)).collect::<Result<_>>()?;
            for t in (1..steps.len()).rev() {
                let prev = steps[t - 1].clone();
                for (now, before) in steps[t].iter_mut().zip(prev) {
                    if !before {
                        *now = false;
                    }
                }
            }
            record.trace = crate::engine::InfectionTrace::from_indicators(&steps)?;
        }
    }
    Ok(())
}

fn check_record(record: &RunRecord, graph: &WeightedGraph, flow: &MeanFlow, trial: usize, tally: &mut Tally) -> Result<()> {
    let history = record.history.as_ref().ok_or_else(|| Error::Invariant("run recorded no history".into()))?;
    let total = record.final_state.total_walkers();
    let expected = (record.final_state.t_max() * graph.degree_sum()) as u64;
    for (t, w) in history.iter().enumerate() {
        let sum: u64 = w.iter().sum();
        tally.record(WALKER_CONSERVATION, sum == expected, || {
            format!("trial {trial} t {t}: {sum} walkers, expected {expected}")
        });
        let eta_sum: f64 = walkers_to_eta(w, total).iter().sum();
        tally.record(DENSITY_NORMALIZATION, (eta_sum - 1.0).abs() <= MEANFLOW_TOLERANCE, || {
            format!("trial {trial} t {t}: sum eta = {eta_sum}")
        });
    }
    for t in 1..history.len() {
        let before = record.trace.indicator(t - 1)?;
        let now = record.trace.indicator(t)?;
        for i in 0..graph.n_nodes() {
            if !before[i] {
                let gained = history[t][i] > history[t - 1][i];
                tally.record(INFECTION_RULE, now[i] == gained, || {
                    format!("trial {trial} t {t} node {i}: infected {} but walker gain {gained}", now[i])
                });
            }
        }
    }

    let bounds = check_bounds(record, graph)?;
    for kind in BoundKind::ALL {
        let first = bounds.violations.iter().find(|v| v.kind == kind).map(|v| {
            format!("trial {trial} node {} t {}: observed {} bound {}", v.node, v.t, v.observed, v.bound)
        });
        let checked = bounds.checked_count(kind);
        if checked > 0 {
            tally.add(kind.name(), checked, bounds.violation_count(kind) as u64, first);
        }
    }

    let iterated = flow.iterate(&record.trace)?;
    let cumulative = record.trace.cumulative_through(record.trace.len() - 1)?;
    let closed = flow.closed_form(&cumulative)?;
    let last = &iterated[iterated.len() - 1];
    let err = last.iter().zip(&closed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    tally.record(MASTER_EQUATION, err <= MEANFLOW_TOLERANCE, || {
        format!("trial {trial}: iterated and closed form differ by {err:e}")
    });
    for (t, eta) in iterated.iter().enumerate() {
        let s: f64 = eta.iter().sum();
        tally.record(MEANFLOW_NORMALIZATION, (s - 1.0).abs() <= MEANFLOW_TOLERANCE, || {
            format!("trial {trial} t {t}: mean-flow sum eta = {s}")
        });
    }
    Ok(())
}
