//! SIS dynamics as walker motion.
//!
//! Two engines share the same state variable, the walker density
//! `eta_i(t) = walkers_i(t) / N` with `N = t_max * Σ_j k_j`:
//!
//! * the stochastic engine moves integer walkers. An infected node pushes
//!   one walker along each of its bonds, each crossing independently with
//!   probability `w_ij`. A susceptible node that receives a walker is
//!   infected at `t + 1`. Every node infected at `t` recovers at `t + 1`
//!   unless it also received a walker. All moves in a step are computed
//!   from the state at `t`.
//! * the mean-flow engine moves density along the normalized weights
//!   `w_ij / Σ_m w_im`, with every infected node shedding `eta_i(t0) / t_max`
//!   per step. It can be iterated step by step or evaluated in closed form
//!   from the cumulative infection counts.
//!
//! The two engines do not agree on per-edge flux (`w_ij` vs. the
//! normalized weight); they agree on conservation and on the bounds.

use rand::Rng;

use crate::error::{Error, Result};
use crate::netgen::WeightedGraph;

/// Steps a node stays infected without reinfection.
pub const TAU_INF: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpidemicState {
    time: usize,
    t_max: usize,
    infected: Vec<bool>,
    walkers: Vec<u64>,
    ever_infected: Vec<bool>,
    total_walkers: u64,
}

impl EpidemicState {
    pub fn time(&self) -> usize {
        self.time
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn tau_inf(&self) -> usize {
        TAU_INF
    }

    pub fn n_nodes(&self) -> usize {
        self.infected.len()
    }

    pub fn infected(&self) -> &[bool] {
        &self.infected
    }

    pub fn is_infected(&self, i: usize) -> bool {
        self.infected[i]
    }

    pub fn infected_nodes(&self) -> Vec<usize> {
        self.infected.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i).collect()
    }

    pub fn infected_count(&self) -> usize {
        self.infected.iter().filter(|&&x| x).count()
    }

    /// I(t) as a population fraction; S(t) = 1 - I(t).
    pub fn infected_fraction(&self) -> f64 {
        self.infected_count() as f64 / self.n_nodes() as f64
    }

    pub fn susceptible_fraction(&self) -> f64 {
        (self.n_nodes() - self.infected_count()) as f64 / self.n_nodes() as f64
    }

    pub fn walkers(&self) -> &[u64] {
        &self.walkers
    }

    pub fn ever_infected(&self) -> &[bool] {
        &self.ever_infected
    }

    /// N = t_max * Σ_j k_j.
    pub fn total_walkers(&self) -> u64 {
        self.total_walkers
    }

    pub fn eta(&self, i: usize) -> f64 {
        self.walkers[i] as f64 / self.total_walkers as f64
    }

    pub fn eta_vec(&self) -> Vec<f64> {
        walkers_to_eta(&self.walkers, self.total_walkers)
    }

    pub fn is_extinct(&self) -> bool {
        !self.infected.iter().any(|&x| x)
    }

    /// Checks walker conservation and the recorded total.
    pub fn check_conservation(&self) -> Result<()> {
        let sum: u64 = self.walkers.iter().sum();
        if sum != self.total_walkers {
            return Err(Error::Invariant(format!(
                "walker conservation: {sum} walkers present at t = {}, {} expected",
                self.time, self.total_walkers
            )));
        }
        Ok(())
    }
}

pub fn walkers_to_eta(walkers: &[u64], total: u64) -> Vec<f64> {
    walkers.iter().map(|&w| w as f64 / total as f64).collect()
}

/// `t_max * k_i` walkers on every node; only `initial_node` infected.
pub fn init_state(graph: &WeightedGraph, initial_node: usize, t_max: usize) -> Result<EpidemicState> {
    if initial_node >= graph.n_nodes() {
        return Err(Error::InvalidParameter(format!("initial node {initial_node} does not exist")));
    }
    if graph.degree(initial_node) == 0 {
        return Err(Error::CannotSeed(initial_node));
    }
    if t_max == 0 {
        return Err(Error::InvalidParameter("t_max must be at least 1".into()));
    }
    let walkers: Vec<u64> = graph.degrees().iter().map(|&k| (t_max * k) as u64).collect();
    let total_walkers = walkers.iter().sum();
    let mut infected = vec![false; graph.n_nodes()];
    infected[initial_node] = true;
    Ok(EpidemicState {
        time: 0,
        t_max,
        ever_infected: infected.clone(),
        infected,
        walkers,
        total_walkers,
    })
}

/// One synchronous step of the stochastic engine.
pub fn step_stochastic<R: Rng + ?Sized>(state: &EpidemicState, graph: &WeightedGraph, rng: &mut R) -> Result<EpidemicState> {
    advance(state, graph, rng, |_, _| {})
}

/// Like [`step_stochastic`], also reporting every walker move as `(from, to)`.
pub fn step_stochastic_traced<R: Rng + ?Sized>(
    state: &EpidemicState,
    graph: &WeightedGraph,
    rng: &mut R,
    moves: &mut Vec<(usize, usize)>,
) -> Result<EpidemicState> {
    advance(state, graph, rng, |i, j| moves.push((i, j)))
}

fn advance<R: Rng + ?Sized>(
    state: &EpidemicState,
    graph: &WeightedGraph,
    rng: &mut R,
    mut on_move: impl FnMut(usize, usize),
) -> Result<EpidemicState> {
    if state.time >= state.t_max {
        return Err(Error::Domain(format!("t_max = {} reached; no walkers are provisioned beyond it", state.t_max)));
    }
    let n = state.n_nodes();
    if graph.n_nodes() != n {
        return Err(Error::Validation(format!("state has {n} nodes, graph has {}", graph.n_nodes())));
    }
    let mut walkers = state.walkers.clone();
    let mut next = vec![false; n];
    for i in state.infected.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i) {
        let k = graph.degree(i);
        if state.walkers[i] < k as u64 {
            return Err(Error::Invariant(format!(
                "walker underflow: node {i} has {} walkers for {k} bonds at t = {}",
                state.walkers[i], state.time
            )));
        }
        for nb in graph.neighbors(i) {
            let u: f64 = rng.gen();
            if u < nb.weight {
                walkers[i] -= 1;
                walkers[nb.node] += 1;
                next[nb.node] = true;
                on_move(i, nb.node);
            }
        }
    }
    let mut ever_infected = state.ever_infected.clone();
    for (e, &x) in ever_infected.iter_mut().zip(&next) {
        *e |= x;
    }
    let out = EpidemicState {
        time: state.time + 1,
        t_max: state.t_max,
        infected: next,
        walkers,
        ever_infected,
        total_walkers: state.total_walkers,
    };
    out.check_conservation()?;
    Ok(out)
}

/// Per-step infected sets and the running infection count per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfectionTrace {
    n_nodes: usize,
    steps: Vec<Vec<usize>>,
    cumulative: Vec<u32>,
}

impl InfectionTrace {
    pub fn new(n_nodes: usize) -> Self {
        InfectionTrace { n_nodes, steps: Vec::new(), cumulative: vec![0; n_nodes] }
    }

    /// Builds a trace from explicit indicator vectors, one per step.
    pub fn from_indicators(indicators: &[Vec<bool>]) -> Result<Self> {
        let n = indicators.first().map_or(0, Vec::len);
        let mut trace = InfectionTrace::new(n);
        for ind in indicators {
            trace.push_indicator(ind)?;
        }
        Ok(trace)
    }

    pub fn push_indicator(&mut self, infected: &[bool]) -> Result<()> {
        if infected.len() != self.n_nodes {
            return Err(Error::Validation(format!(
                "indicator of length {} for a {}-node trace",
                infected.len(),
                self.n_nodes
            )));
        }
        let nodes: Vec<usize> = infected.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i).collect();
        for &i in &nodes {
            self.cumulative[i] += 1;
        }
        self.steps.push(nodes);
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Number of recorded steps (`t = 0 ..= len - 1`).
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last_time(&self) -> Option<usize> {
        self.steps.len().checked_sub(1)
    }

    fn check_t(&self, t: usize) -> Result<()> {
        match self.last_time() {
            Some(last) if t <= last => Ok(()),
            last => Err(Error::Range { t, last: last.unwrap_or(0) }),
        }
    }

    /// Infected node indices at `t`, ascending.
    pub fn infected_at(&self, t: usize) -> Result<&[usize]> {
        self.check_t(t)?;
        Ok(&self.steps[t])
    }

    pub fn steps(&self) -> &[Vec<usize>] {
        &self.steps
    }

    pub fn indicator(&self, t: usize) -> Result<Vec<bool>> {
        let mut v = vec![false; self.n_nodes];
        for &i in self.infected_at(t)? {
            v[i] = true;
        }
        Ok(v)
    }

    /// Σ_{τ=0}^{t} I_i(τ) for every node.
    pub fn cumulative_through(&self, t: usize) -> Result<Vec<u32>> {
        self.check_t(t)?;
        let mut c = vec![0u32; self.n_nodes];
        for step in &self.steps[..=t] {
            for &i in step {
                c[i] += 1;
            }
        }
        Ok(c)
    }

    /// Cumulative counts over the whole trace.
    pub fn cumulative(&self) -> &[u32] {
        &self.cumulative
    }

    /// Nodes infected at least once in `[0, t]`.
    pub fn ever_infected_through(&self, t: usize) -> Result<Vec<bool>> {
        Ok(self.cumulative_through(t)?.into_iter().map(|c| c > 0).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopPolicy {
    /// Stop as soon as no node is infected.
    AtExtinction,
    /// Always run to `t_max` (the state is frozen after extinction).
    FullHorizon,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub t_max: usize,
    pub stop: StopPolicy,
    /// Keep per-step walker counts (memory `O(n_nodes * t_max)`).
    pub record_history: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRecord {
    pub initial_node: usize,
    pub trace: InfectionTrace,
    /// Walker counts for `t = 0 ..= final_state.time()`, when recorded.
    pub history: Option<Vec<Vec<u64>>>,
    pub final_state: EpidemicState,
    /// First step with no infected node.
    pub extinct_at: Option<usize>,
}

impl RunRecord {
    /// eta(t) for every recorded step.
    pub fn eta_history(&self) -> Option<Vec<Vec<f64>>> {
        let total = self.final_state.total_walkers();
        self.history.as_ref().map(|h| h.iter().map(|w| walkers_to_eta(w, total)).collect())
    }
}

/// Runs the stochastic engine from `initial_node`, recording everything.
pub fn run<R: Rng + ?Sized>(
    graph: &WeightedGraph,
    initial_node: usize,
    t_max: usize,
    rng: &mut R,
    stop: StopPolicy,
) -> Result<RunRecord> {
    run_with(graph, initial_node, rng, &RunOptions { t_max, stop, record_history: true })
}

pub fn run_with<R: Rng + ?Sized>(
    graph: &WeightedGraph,
    initial_node: usize,
    rng: &mut R,
    opts: &RunOptions,
) -> Result<RunRecord> {
    let mut state = init_state(graph, initial_node, opts.t_max)?;
    let mut trace = InfectionTrace::new(graph.n_nodes());
    trace.push_indicator(state.infected())?;
    let mut history = opts.record_history.then(|| vec![state.walkers().to_vec()]);
    let mut extinct_at = None;
    while state.time() < opts.t_max {
        if state.is_extinct() && opts.stop == StopPolicy::AtExtinction {
            break;
        }
        state = step_stochastic(&state, graph, rng)?;
        trace.push_indicator(state.infected())?;
        if let Some(h) = history.as_mut() {
            h.push(state.walkers().to_vec());
        }
        if extinct_at.is_none() && state.is_extinct() {
            extinct_at = Some(state.time());
        }
    }
    Ok(RunRecord { initial_node, trace, history, final_state: state, extinct_at })
}

/// Column-stochastic matrix of normalized weights: `T_ij = w_ji / Σ_m w_jm`
/// for bonded `i, j`. Columns of nodes whose outgoing weights are all zero
/// are empty and flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    n: usize,
    /// `columns[j]` lists `(i, T_ij)` in ascending `i`.
    columns: Vec<Vec<(usize, f64)>>,
    zero_column: Vec<bool>,
}

pub fn build_transfer_matrix(graph: &WeightedGraph) -> TransferMatrix {
    let n = graph.n_nodes();
    let mut columns = Vec::with_capacity(n);
    let mut zero_column = Vec::with_capacity(n);
    for j in 0..n {
        let total = graph.out_weight_sum(j);
        if total > 0.0 {
            columns.push(graph.neighbors(j).iter().map(|nb| (nb.node, nb.weight / total)).collect());
            zero_column.push(false);
        } else {
            columns.push(Vec::new());
            zero_column.push(true);
        }
    }
    TransferMatrix { n, columns, zero_column }
}

impl TransferMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.columns[j]
            .binary_search_by_key(&i, |&(r, _)| r)
            .map_or(0.0, |s| self.columns[j][s].1)
    }

    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.columns[j]
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        self.columns[j].iter().map(|&(_, v)| v).sum()
    }

    pub fn is_zero_column(&self, j: usize) -> bool {
        self.zero_column[j]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::Validation(format!("vector of length {} for a {}x{} matrix", x.len(), self.n, self.n)));
        }
        let mut y = vec![0.0; self.n];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                y[i] += v * x[j];
            }
        }
        Ok(y)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                m[i][j] = v;
            }
        }
        m
    }
}

/// eta_i(t0) = k_i / Σ_j k_j.
pub fn initial_density(graph: &WeightedGraph) -> Result<Vec<f64>> {
    let sum = graph.degree_sum();
    if sum == 0 {
        return Err(Error::Validation("graph has no bonds; walker density is undefined".into()));
    }
    Ok(graph.degrees().iter().map(|&k| k as f64 / sum as f64).collect())
}

/// C_ij = (k_i / Σ k) * w_ij / Σ_m w_im, the mean-flow share of walkers
/// crossing `(i, j)` per step while `i` is infected.
pub fn edge_current(graph: &WeightedGraph, i: usize, j: usize) -> Result<f64> {
    let w = graph
        .weight(i, j)
        .ok_or_else(|| Error::InvalidParameter(format!("({i}, {j}) is not a bond")))?;
    let total = graph.out_weight_sum(i);
    if total <= 0.0 {
        return Err(Error::UndefinedCurrent(i));
    }
    Ok(graph.degree(i) as f64 / graph.degree_sum() as f64 * (w / total))
}

/// Deterministic mean-flow engine.
#[derive(Debug, Clone)]
pub struct MeanFlow {
    transfer: TransferMatrix,
    eta0: Vec<f64>,
    t_max: usize,
}

impl MeanFlow {
    pub fn new(graph: &WeightedGraph, t_max: usize) -> Result<Self> {
        if t_max == 0 {
            return Err(Error::InvalidParameter("t_max must be at least 1".into()));
        }
        Ok(MeanFlow { transfer: build_transfer_matrix(graph), eta0: initial_density(graph)?, t_max })
    }

    pub fn eta0(&self) -> &[f64] {
        &self.eta0
    }

    pub fn transfer(&self) -> &TransferMatrix {
        &self.transfer
    }

    /// eta(t+1) = eta(t) + J^-(t) - J^+(t), with
    /// `J^-_i = Σ_j I_j C_ji` and `J^+_i = I_i Σ_j C_ij`.
    /// Flagged zero-weight nodes carry no current.
    pub fn step(&self, eta: &[f64], infected: &[bool]) -> Result<Vec<f64>> {
        let n = self.transfer.dim();
        if eta.len() != n || infected.len() != n {
            return Err(Error::Validation(format!(
                "dimension mismatch: eta {}, infected {}, graph {n}",
                eta.len(),
                infected.len()
            )));
        }
        let mut inflow = vec![0.0; n];
        let mut outflow = vec![0.0; n];
        for j in (0..n).filter(|&j| infected[j]) {
            let scale = self.eta0[j] / self.t_max as f64;
            for &(i, t_ij) in self.transfer.column(j) {
                let c = scale * t_ij;
                inflow[i] += c;
                outflow[j] += c;
            }
        }
        Ok((0..n).map(|i| eta[i] + inflow[i] - outflow[i]).collect())
    }

    /// Closed form after steps `0 ..= t` given `cumulative[i] = Σ_{τ<=t} I_i(τ)`:
    /// `eta(t+1) = eta0 + (T - 1)(c ⊙ eta0) / t_max`, where the identity term
    /// is dropped for flagged zero-weight columns.
    pub fn closed_form(&self, cumulative: &[u32]) -> Result<Vec<f64>> {
        let n = self.transfer.dim();
        if cumulative.len() != n {
            return Err(Error::Validation(format!(
                "cumulative trace has {} entries for a {n}-node graph",
                cumulative.len()
            )));
        }
        let weighted: Vec<f64> = self.eta0.iter().zip(cumulative).map(|(e, &c)| e * c as f64).collect();
        let moved = self.transfer.mul_vec(&weighted)?;
        let t_max = self.t_max as f64;
        Ok((0..n)
            .map(|i| {
                let shed = if self.transfer.is_zero_column(i) { 0.0 } else { weighted[i] };
                self.eta0[i] + (moved[i] - shed) / t_max
            })
            .collect())
    }

    /// Iterates [`MeanFlow::step`] over the trace, returning eta for
    /// `t = 0 ..= trace.len()`.
    pub fn iterate(&self, trace: &InfectionTrace) -> Result<Vec<Vec<f64>>> {
        if trace.n_nodes() != self.transfer.dim() {
            return Err(Error::Validation(format!(
                "trace has {} nodes, graph has {}",
                trace.n_nodes(),
                self.transfer.dim()
            )));
        }
        let mut out = vec![self.eta0.clone()];
        for t in 0..trace.len() {
            let next = self.step(out.last().expect("nonempty"), &trace.indicator(t)?)?;
            out.push(next);
        }
        Ok(out)
    }
}
