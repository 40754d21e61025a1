//! Replicated sweeps over the perturbed seed node's `(D, S)` targets.
//!
//! Replicate `r` of every cell and scenario runs on the same topology: the
//! graph seed depends only on `(base_seed, r)`, and the no-long-distance
//! scenario drops the long bonds of that same graph (its short bonds are
//! exactly those of the `p_R = 0` graph from the same seed). Only the seed
//! node's outgoing weights change between cells.
//!
//! Run seeds are `derive_seed(base_seed, [RUN_DOMAIN, scenario, bits(d),
//! bits(s), r])`, keyed by the cell's target values rather than its grid
//! position, so reordering a grid leaves every cell's numbers unchanged.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{outcome_metrics, DEFAULT_PR_THRESHOLD};
use crate::engine::{run_with, RunOptions, StopPolicy};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, sha256_hex, write_atomic};
use crate::netgen::{generate_graph, load_graph, BondKind, GraphParams, WeightedGraph};
use crate::seeds::{derive_seed, GRAPH_DOMAIN, RUN_DOMAIN};
use crate::weights::{
    assign_baseline_weights, inject_heterogeneity, node_metrics, plan_difference_multiset, HeterogeneitySpec,
    WeightPolicy, DEFAULT_BIN_WIDTH,
};
use crate::SimRng;

/// Marker written into surface grids for cells whose targets were not met.
pub const INFEASIBLE_MARKER: &str = "NA";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Short and long bonds.
    SmallWorld,
    /// Long bonds removed (`p_R = 0`).
    NoLongDistance,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::SmallWorld => "small-world",
            Scenario::NoLongDistance => "no-long-distance",
        }
    }

    fn code(self) -> u64 {
        match self {
            Scenario::SmallWorld => 0,
            Scenario::NoLongDistance => 1,
        }
    }

    /// Wanted `(short, long)` bond counts of the seed node for a target degree.
    pub fn composition(self, degree: usize) -> (usize, usize) {
        match self {
            Scenario::SmallWorld if degree > 0 => (degree - 1, 1),
            _ => (degree, 0),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_n_nodes() -> usize {
    2000
}
fn default_short_radius() -> f64 {
    0.08
}
fn default_long_radius() -> f64 {
    0.5
}
fn default_short_degree() -> f64 {
    25.0
}
fn default_long_degree() -> f64 {
    0.09
}
fn default_scenarios() -> Vec<Scenario> {
    vec![Scenario::SmallWorld, Scenario::NoLongDistance]
}
fn default_d_targets() -> Vec<f64> {
    (-6..=6).map(|i| i as f64 / 10.0).collect()
}
fn default_s_targets() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}
fn default_replicates() -> usize {
    25
}
fn default_t_max() -> usize {
    200
}
fn default_pr_threshold() -> f64 {
    DEFAULT_PR_THRESHOLD
}
fn default_weight() -> f64 {
    0.03
}
fn default_bin_width() -> f64 {
    DEFAULT_BIN_WIDTH
}
fn default_s_tolerance() -> f64 {
    0.1
}
fn default_max_levels() -> usize {
    8
}
fn default_seed_degree() -> usize {
    20
}

/// Everything a sweep depends on. Unset fields take the paper-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_n_nodes")]
    pub n_nodes: usize,
    #[serde(rename = "r", default = "default_short_radius")]
    pub short_radius: f64,
    #[serde(rename = "R", default = "default_long_radius")]
    pub long_radius: f64,
    /// Bond probabilities are calibrated per replicate to these mean degrees.
    #[serde(default = "default_short_degree")]
    pub mean_short_degree: f64,
    #[serde(default = "default_long_degree")]
    pub mean_long_degree: f64,
    /// Use this graph for every replicate instead of generating one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_path: Option<PathBuf>,
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<Scenario>,
    #[serde(default = "default_d_targets")]
    pub d_targets: Vec<f64>,
    #[serde(default = "default_s_targets")]
    pub s_targets: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_pr_threshold")]
    pub pr_threshold: f64,
    #[serde(default = "default_weight")]
    pub w_short: f64,
    #[serde(default = "default_weight")]
    pub w_long: f64,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
    /// Allowed |achieved D - target D|; defaults to one bin width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_tolerance: Option<f64>,
    #[serde(default = "default_s_tolerance")]
    pub s_tolerance: f64,
    #[serde(default = "default_max_levels")]
    pub max_levels: usize,
    #[serde(default = "default_seed_degree")]
    pub seed_degree: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

impl SweepConfig {
    /// N = 2000, r = 0.08, R = 0.5, T_max = 200.
    pub fn paper() -> Self {
        Self::default()
    }

    /// N = 500 with the short radius doubled so the calibrated short
    /// probability matches the paper-scale one.
    pub fn desk() -> Self {
        SweepConfig { n_nodes: 500, short_radius: 0.16, ..Self::default() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: SweepConfig =
            serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn d_tolerance(&self) -> f64 {
        self.d_tolerance.unwrap_or(self.bin_width)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.d_targets.is_empty() || self.s_targets.is_empty() {
            return bad("d_targets and s_targets must be nonempty".into());
        }
        if self.scenarios.is_empty() {
            return bad("at least one scenario is required".into());
        }
        let mut seen = self.scenarios.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.scenarios.len() {
            return bad("scenarios must be distinct".into());
        }
        for (name, list) in [("d_targets", &self.d_targets), ("s_targets", &self.s_targets)] {
            if list.iter().any(|x| !x.is_finite()) {
                return bad(format!("{name} must be finite"));
            }
            let mut bits: Vec<u64> = list.iter().map(|x| x.to_bits()).collect();
            bits.sort_unstable();
            bits.dedup();
            if bits.len() != list.len() {
                return bad(format!("{name} contains duplicates"));
            }
        }
        if self.s_targets.iter().any(|&s| s < 0.0) {
            return bad("s_targets must be nonnegative".into());
        }
        if self.t_max == 0 {
            return bad("t_max must be positive".into());
        }
        if !(self.pr_threshold >= 0.0 && self.pr_threshold <= 1.0) {
            return bad(format!("pr_threshold = {} must lie in [0, 1]", self.pr_threshold));
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return bad(format!("bin_width = {} must be positive", self.bin_width));
        }
        if !(self.d_tolerance() >= 0.0 && self.s_tolerance >= 0.0) {
            return bad("tolerances must be nonnegative".into());
        }
        if self.max_levels == 0 || self.seed_degree == 0 {
            return bad("max_levels and seed_degree must be positive".into());
        }
        WeightPolicy { w_short: self.w_short, w_long: self.w_long }.validate()?;
        if self.graph_path.is_none() {
            GraphParams {
                n_nodes: self.n_nodes,
                short_radius: self.short_radius,
                p_short: 0.0,
                long_radius: self.long_radius,
                p_long: 0.0,
                seed: 0,
            }
            .validate()?;
        }
        Ok(())
    }

    fn policy(&self) -> WeightPolicy {
        WeightPolicy { w_short: self.w_short, w_long: self.w_long }
    }
}

/// Which node was chosen to seed the epidemic and how well it matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SeedSelection {
    pub node: usize,
    pub degree: usize,
    pub short: usize,
    pub long: usize,
    /// `|k - target degree|`.
    pub degree_gap: usize,
    /// `|long bonds - wanted long bonds|`.
    pub composition_mismatch: usize,
}

impl SeedSelection {
    pub fn is_exact(&self) -> bool {
        self.degree_gap == 0 && self.composition_mismatch == 0
    }
}

/// Node of degree `target_degree` with the scenario's bond composition, or
/// the closest by `(|k - target|, composition mismatch)`; lowest index on ties.
/// Isolated nodes are never chosen.
pub fn select_seed_node(graph: &WeightedGraph, scenario: Scenario, target_degree: usize) -> Result<SeedSelection> {
    if graph.n_nodes() == 0 {
        return Err(Error::SeedSelection("graph has no nodes".into()));
    }
    let (_, want_long) = scenario.composition(target_degree);
    let best = (0..graph.n_nodes())
        .filter(|&i| graph.degree(i) > 0)
        .map(|i| {
            let long = graph.neighbors(i).iter().filter(|nb| nb.kind == BondKind::Long).count();
            let degree = graph.degree(i);
            let short = degree - long;
            SeedSelection {
                node: i,
                degree,
                short,
                long,
                degree_gap: degree.abs_diff(target_degree),
                composition_mismatch: long.abs_diff(want_long),
            }
        })
        .min_by_key(|s| (s.degree_gap, s.composition_mismatch, s.node));
    best.ok_or_else(|| Error::SeedSelection("every node is isolated".into()))
}

/// One simulated run of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub scenario: Scenario,
    pub d_index: usize,
    pub s_index: usize,
    pub replicate: usize,
    pub target_d: f64,
    pub target_s: f64,
    pub graph_seed: u64,
    pub run_seed: u64,
    pub seed: SeedSelection,
    pub achieved_d: f64,
    pub achieved_s: f64,
    pub clamped: usize,
    pub pr: f64,
    pub diam: f64,
    pub extinct_at: Option<usize>,
    pub outbreak: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
        Summary { mean: v.iter().sum::<f64>() / n as f64, median, max: v[n - 1] }
    }
}

/// Aggregates of one `(scenario, d, s)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRow {
    pub scenario: Scenario,
    pub d_index: usize,
    pub s_index: usize,
    pub target_d: f64,
    pub target_s: f64,
    pub achieved_d: f64,
    pub achieved_s: f64,
    /// Mean achieved metrics within tolerance of the targets.
    pub feasible: bool,
    pub pr: Summary,
    pub diam: Summary,
    pub outbreak_fraction: f64,
    pub extinct_fraction: f64,
    /// Mean extinction step over the runs that went extinct.
    pub mean_extinction_time: Option<f64>,
    pub replicates: usize,
    pub run_seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    /// Ordered by scenario (config order), then `d_index`, then `s_index`.
    pub cells: Vec<CellRow>,
    /// Same order as `cells`, replicates innermost.
    pub runs: Vec<RunRow>,
}

impl SweepResult {
    pub fn cell(&self, scenario: Scenario, target_d: f64, target_s: f64) -> Option<&CellRow> {
        self.cells
            .iter()
            .find(|c| c.scenario == scenario && c.target_d == target_d && c.target_s == target_s)
    }

    pub fn runs_for<'a>(&'a self, cell: &'a CellRow) -> impl Iterator<Item = &'a RunRow> + 'a {
        self.runs
            .iter()
            .filter(move |r| r.scenario == cell.scenario && r.d_index == cell.d_index && r.s_index == cell.s_index)
    }
}

pub fn graph_seed(base_seed: u64, replicate: usize) -> u64 {
    derive_seed(base_seed, &[GRAPH_DOMAIN, replicate as u64])
}

pub fn run_seed(base_seed: u64, scenario: Scenario, target_d: f64, target_s: f64, replicate: usize) -> u64 {
    derive_seed(base_seed, &[RUN_DOMAIN, scenario.code(), target_d.to_bits(), target_s.to_bits(), replicate as u64])
}

/// Baseline-weighted topology of one replicate, per scenario.
struct ReplicateGraphs {
    seed: u64,
    by_scenario: BTreeMap<Scenario, (WeightedGraph, SeedSelection)>,
}

fn build_replicate(config: &SweepConfig, fixed: Option<&WeightedGraph>, replicate: usize) -> Result<ReplicateGraphs> {
    let seed = graph_seed(config.base_seed, replicate);
    let full = match fixed {
        Some(g) => g.clone(),
        None => {
            let params = GraphParams::calibrated(
                config.n_nodes,
                config.short_radius,
                config.long_radius,
                config.mean_short_degree,
                config.mean_long_degree,
                seed,
            )?;
            generate_graph(&params)?
        }
    };
    let full = assign_baseline_weights(&full, &config.policy())?;
    let mut by_scenario = BTreeMap::new();
    for &scenario in &config.scenarios {
        let g = match scenario {
            Scenario::SmallWorld => full.clone(),
            Scenario::NoLongDistance => full.without_long_bonds(),
        };
        let sel = select_seed_node(&g, scenario, config.seed_degree)?;
        if !sel.is_exact() {
            log::warn!(
                "replicate {replicate} ({scenario}): no exact seed node; using node {} with {} short + {} long bonds",
                sel.node,
                sel.short,
                sel.long
            );
        }
        by_scenario.insert(scenario, (g, sel));
    }
    Ok(ReplicateGraphs { seed, by_scenario })
}

fn simulate(
    config: &SweepConfig,
    rep: &ReplicateGraphs,
    scenario: Scenario,
    (d_index, s_index): (usize, usize),
    replicate: usize,
) -> Result<RunRow> {
    let (target_d, target_s) = (config.d_targets[d_index], config.s_targets[s_index]);
    let (base, sel) = &rep.by_scenario[&scenario];
    let plan = plan_difference_multiset(sel.degree, target_d, target_s, config.bin_width, config.max_levels)?;
    let spec = HeterogeneitySpec { node: sel.node, bin_width: config.bin_width, differences: plan.differences };
    let clamped = crate::weights::clamped_count(base, &spec);
    let graph = inject_heterogeneity(base, &spec)?;
    let metrics = node_metrics(&graph, sel.node, config.bin_width)?;
    let seed = run_seed(config.base_seed, scenario, target_d, target_s, replicate);
    let mut rng = SimRng::seed_from_u64(seed);
    let opts = RunOptions { t_max: config.t_max, stop: StopPolicy::AtExtinction, record_history: false };
    let record = run_with(&graph, sel.node, &mut rng, &opts)?;
    let outcome = outcome_metrics(&record, &graph, config.pr_threshold)?;
    Ok(RunRow {
        scenario,
        d_index,
        s_index,
        replicate,
        target_d,
        target_s,
        graph_seed: rep.seed,
        run_seed: seed,
        seed: *sel,
        achieved_d: metrics.d_value,
        achieved_s: metrics.entropy,
        clamped,
        pr: outcome.pr,
        diam: outcome.diam,
        extinct_at: record.extinct_at,
        outbreak: outcome.outbreak,
    })
}

fn aggregate(config: &SweepConfig, runs: &[RunRow]) -> CellRow {
    let first = &runs[0];
    let n = runs.len() as f64;
    let achieved_d = runs.iter().map(|r| r.achieved_d).sum::<f64>() / n;
    let achieved_s = runs.iter().map(|r| r.achieved_s).sum::<f64>() / n;
    let extinct: Vec<f64> = runs.iter().filter_map(|r| r.extinct_at.map(|t| t as f64)).collect();
    CellRow {
        scenario: first.scenario,
        d_index: first.d_index,
        s_index: first.s_index,
        target_d: first.target_d,
        target_s: first.target_s,
        achieved_d,
        achieved_s,
        // a small slack absorbs the rounding of bin-centre arithmetic
        feasible: (achieved_d - first.target_d).abs() <= config.d_tolerance() + 1e-9
            && (achieved_s - first.target_s).abs() <= config.s_tolerance + 1e-9,
        pr: Summary::of(&runs.iter().map(|r| r.pr).collect::<Vec<_>>()),
        diam: Summary::of(&runs.iter().map(|r| r.diam).collect::<Vec<_>>()),
        outbreak_fraction: runs.iter().filter(|r| r.outbreak).count() as f64 / n,
        extinct_fraction: extinct.len() as f64 / n,
        mean_extinction_time: (!extinct.is_empty()).then(|| extinct.iter().sum::<f64>() / extinct.len() as f64),
        replicates: runs.len(),
        run_seeds: runs.iter().map(|r| r.run_seed).collect(),
    }
}

/// Runs the sweep on the current rayon pool.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let fixed = config.graph_path.as_deref().map(load_graph).transpose()?;
    let replicates: Vec<Arc<ReplicateGraphs>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| build_replicate(config, fixed.as_ref(), r).map(Arc::new))
        .collect::<Result<_>>()?;

    let mut tasks = Vec::new();
    for &scenario in &config.scenarios {
        for d in 0..config.d_targets.len() {
            for s in 0..config.s_targets.len() {
                for r in 0..config.replicates {
                    tasks.push((scenario, (d, s), r));
                }
            }
        }
    }
    log::info!("sweep: {} runs on {} worker(s)", tasks.len(), rayon::current_num_threads());
    let runs: Vec<RunRow> = tasks
        .par_iter()
        .map(|&(scenario, cell, r)| simulate(config, &replicates[r], scenario, cell, r))
        .collect::<Result<_>>()?;
    let cells = runs.chunks(config.replicates).map(|chunk| aggregate(config, chunk)).collect();
    Ok(SweepResult { config: config.clone(), cells, runs })
}

/// Runs the sweep on a dedicated pool of `workers` threads.
pub fn run_sweep_with_workers(config: &SweepConfig, workers: usize) -> Result<SweepResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_sweep(config))
}

fn surface_csv(result: &SweepResult, scenario: Scenario, value: impl Fn(&CellRow) -> f64) -> String {
    let cfg = &result.config;
    let mut out = String::from("d_target");
    for s in &cfg.s_targets {
        out.push_str(&format!(",s={}", fmt_f64(*s)));
    }
    out.push('\n');
    for (di, d) in cfg.d_targets.iter().enumerate() {
        out.push_str(&fmt_f64(*d));
        for si in 0..cfg.s_targets.len() {
            let cell = result
                .cells
                .iter()
                .find(|c| c.scenario == scenario && c.d_index == di && c.s_index == si)
                .expect("every cell aggregated");
            out.push(',');
            if cell.feasible {
                out.push_str(&fmt_f64(value(cell)));
            } else {
                out.push_str(INFEASIBLE_MARKER);
            }
        }
        out.push('\n');
    }
    out
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn cells_csv(result: &SweepResult) -> String {
    let mut out = String::from(
        "scenario,d_index,s_index,target_d,target_s,achieved_d,achieved_s,feasible,pr_mean,pr_median,pr_max,\
         diam_mean,diam_median,diam_max,outbreak_fraction,extinct_fraction,mean_extinction_time,replicates,pr_threshold\n",
    );
    for c in &result.cells {
        let fields = [
            c.scenario.to_string(),
            c.d_index.to_string(),
            c.s_index.to_string(),
            fmt_f64(c.target_d),
            fmt_f64(c.target_s),
            fmt_f64(c.achieved_d),
            fmt_f64(c.achieved_s),
            c.feasible.to_string(),
            fmt_f64(c.pr.mean),
            fmt_f64(c.pr.median),
            fmt_f64(c.pr.max),
            fmt_f64(c.diam.mean),
            fmt_f64(c.diam.median),
            fmt_f64(c.diam.max),
            fmt_f64(c.outbreak_fraction),
            fmt_f64(c.extinct_fraction),
            opt(c.mean_extinction_time.map(fmt_f64)),
            c.replicates.to_string(),
            fmt_f64(result.config.pr_threshold),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn runs_long_csv(result: &SweepResult) -> String {
    let mut out = String::from(
        "scenario,d_index,s_index,replicate,target_d,target_s,graph_seed,run_seed,seed_node,seed_degree,seed_short,\
         seed_long,seed_exact,achieved_d,achieved_s,clamped,pr,diam,extinct_at,outbreak\n",
    );
    for r in &result.runs {
        let fields = [
            r.scenario.to_string(),
            r.d_index.to_string(),
            r.s_index.to_string(),
            r.replicate.to_string(),
            fmt_f64(r.target_d),
            fmt_f64(r.target_s),
            r.graph_seed.to_string(),
            r.run_seed.to_string(),
            r.seed.node.to_string(),
            r.seed.degree.to_string(),
            r.seed.short.to_string(),
            r.seed.long.to_string(),
            r.seed.is_exact().to_string(),
            fmt_f64(r.achieved_d),
            fmt_f64(r.achieved_s),
            r.clamped.to_string(),
            fmt_f64(r.pr),
            fmt_f64(r.diam),
            opt(r.extinct_at),
            r.outbreak.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Writes the surfaces, the cell and run tables and a manifest with their
/// SHA-256 digests. Returns the written paths, manifest last.
pub fn export_surfaces(result: &SweepResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut files: Vec<(String, String)> = Vec::new();
    for &scenario in &result.config.scenarios {
        files.push((format!("pr_surface_{scenario}.csv"), surface_csv(result, scenario, |c| c.pr.mean)));
        files.push((format!("diam_surface_{scenario}.csv"), surface_csv(result, scenario, |c| c.diam.mean)));
    }
    files.push(("cells.csv".into(), cells_csv(result)));
    files.push(("runs_long.csv".into(), runs_long_csv(result)));

    let mut paths = Vec::new();
    let mut hashes = BTreeMap::new();
    for (name, text) in &files {
        let path = out_dir.join(name);
        write_atomic(&path, text.as_bytes())?;
        hashes.insert(name.clone(), sha256_hex(text.as_bytes()));
        paths.push(path);
    }
    let manifest = serde_json::json!({
        "tool": "epiwalk",
        "version": env!("CARGO_PKG_VERSION"),
        "kind": "sweep",
        "config": result.config,
        "seed_scheme": "graph: derive_seed(base_seed, [GRAPH_DOMAIN, replicate]); run: derive_seed(base_seed, [RUN_DOMAIN, scenario, bits(d), bits(s), replicate])",
        "artifacts": hashes,
    });
    let path = out_dir.join("manifest.json");
    write_atomic(&path, (serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n").as_bytes())?;
    paths.push(path);
    Ok(paths)
}
