//! `epiwalk`: generate graphs, perturb weights, run and analyze SIS walker
//! simulations, sweep the seed node's heterogeneity and verify invariants.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 internal invariant
//! violation (including failed `verify` checks).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use epiwalk_core::analysis::{check_bounds_history, outcome_metrics_from_trace};
use epiwalk_core::engine::{run, InfectionTrace};
use epiwalk_core::io::{fmt_f64, sha256_hex, write_atomic};
use epiwalk_core::netgen::{generate_graph, load_graph, save_graph, to_json_string};
use epiwalk_core::sweep::{export_surfaces, run_sweep_with_workers};
use epiwalk_core::weights::{
    assign_baseline_weights, clamped_count, inject_heterogeneity, node_metrics, plan_difference_multiset,
    DEFAULT_BIN_WIDTH,
};
use epiwalk_core::{Error, GraphParams, HeterogeneitySpec, SimRng, StopPolicy, SweepConfig, WeightPolicy};
use rand::SeedableRng;
use serde_json::json;

#[derive(Parser)]
#[command(name = "epiwalk", version, about = "SIS epidemics as random walks on weighted small-world graphs")]
struct Cli {
    /// Only log errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a geometric small-world graph with baseline weights.
    Gen(GenArgs),
    /// Inject a difference multiset into one node's outgoing weights.
    Perturb(PerturbArgs),
    /// Print a node's difference measure, entropy and binned distribution as CSV.
    Metrics(MetricsArgs),
    /// Run one stochastic simulation.
    Run(RunArgs),
    /// Outcome metrics and bound checks for a run directory.
    Analyze(AnalyzeArgs),
    /// Replicated sweep over the seed node's (D, S) targets.
    Sweep(SweepArgs),
    /// Check engine invariants and density bounds over many seeded runs.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    /// Short radius.
    #[arg(long = "r")]
    short_radius: f64,
    /// Short bond probability.
    #[arg(long = "pr", required_unless_present = "short_degree")]
    p_short: Option<f64>,
    /// Long radius.
    #[arg(long = "R")]
    long_radius: f64,
    /// Long bond probability.
    #[arg(long = "pR", required_unless_present = "long_degree")]
    p_long: Option<f64>,
    #[arg(long)]
    seed: u64,
    /// Calibrate the short bond probability to this mean short degree.
    #[arg(long, conflicts_with = "p_short")]
    short_degree: Option<f64>,
    /// Calibrate the long bond probability to this mean long degree.
    #[arg(long, conflicts_with = "p_long")]
    long_degree: Option<f64>,
    #[arg(long, default_value_t = 0.03)]
    w_short: f64,
    #[arg(long, default_value_t = 0.03)]
    w_long: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PerturbArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    node: usize,
    /// Heterogeneity spec file.
    #[arg(long, required_unless_present = "target_d", conflicts_with_all = ["target_d", "target_s"])]
    spec: Option<PathBuf>,
    /// Build the multiset from a target D instead of a spec file.
    #[arg(long, requires = "target_s", allow_hyphen_values = true)]
    target_d: Option<f64>,
    #[arg(long, requires = "target_d")]
    target_s: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    bin_width: f64,
    #[arg(long, default_value_t = 8)]
    max_levels: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    node: usize,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    bin_width: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stop {
    Extinction,
    Horizon,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    seed_node: usize,
    #[arg(long)]
    tmax: usize,
    /// Drawn at random and recorded in the manifest when omitted.
    #[arg(long)]
    rng_seed: Option<u64>,
    #[arg(long, value_enum, default_value = "horizon")]
    stop: Stop,
    /// Only write rows of infected nodes to run.csv.
    #[arg(long)]
    summary: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long, default_value_t = epiwalk_core::analysis::DEFAULT_PR_THRESHOLD)]
    pr_threshold: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to EPIWALK_WORKERS, then to the number of available cores.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    tmax: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
}

/// Failure of a subcommand, mapped onto the exit-code taxonomy.
enum Failure {
    Core(Error),
    Checks(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet { "error" } else { "info" }))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Perturb(a) => perturb(a),
        Command::Metrics(a) => metrics(a),
        Command::Run(a) => run_cmd(a),
        Command::Analyze(a) => analyze(a),
        Command::Sweep(a) => sweep(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            log::error!("{e}");
            ExitCode::from(if e.is_internal() { 2 } else { 1 })
        }
        Err(Failure::Checks(msg)) => {
            log::error!("{msg}");
            ExitCode::from(2)
        }
    }
}

fn write_manifest(dir: &Path, kind: &str, config: serde_json::Value, artifacts: &[(&str, &[u8])]) -> CmdResult {
    let hashes: serde_json::Map<String, serde_json::Value> =
        artifacts.iter().map(|(name, bytes)| (name.to_string(), json!(sha256_hex(bytes)))).collect();
    let manifest = json!({
        "tool": "epiwalk",
        "version": env!("CARGO_PKG_VERSION"),
        "kind": kind,
        "config": config,
        "artifacts": hashes,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_atomic(&dir.join("manifest.json"), text.as_bytes())?;
    Ok(())
}

fn gen(a: GenArgs) -> CmdResult {
    let mut params = match (a.short_degree, a.long_degree) {
        (None, None) => GraphParams {
            n_nodes: a.n,
            short_radius: a.short_radius,
            p_short: 0.0,
            long_radius: a.long_radius,
            p_long: 0.0,
            seed: a.seed,
        },
        (s, l) => GraphParams::calibrated(a.n, a.short_radius, a.long_radius, s.unwrap_or(0.0), l.unwrap_or(0.0), a.seed)?,
    };
    if let Some(p) = a.p_short {
        params.p_short = p;
    }
    if let Some(p) = a.p_long {
        params.p_long = p;
    }
    let graph = generate_graph(&params)?;
    let graph = assign_baseline_weights(&graph, &WeightPolicy { w_short: a.w_short, w_long: a.w_long })?;
    save_graph(&graph, &a.out)?;
    log::info!(
        "wrote {} nodes, {} short + {} long bonds, mean degree {:.3} to {}",
        graph.n_nodes(),
        graph.count_bonds(epiwalk_core::BondKind::Short),
        graph.count_bonds(epiwalk_core::BondKind::Long),
        graph.avg_degree(),
        a.out.display()
    );
    Ok(())
}

fn perturb(a: PerturbArgs) -> CmdResult {
    let graph = load_graph(&a.graph)?;
    let spec = match (&a.spec, a.target_d, a.target_s) {
        (Some(path), _, _) => HeterogeneitySpec::load(path)?,
        (None, Some(d), Some(s)) => {
            if a.node >= graph.n_nodes() {
                return Err(Error::Spec(format!("node {} does not exist", a.node)).into());
            }
            let plan = plan_difference_multiset(graph.degree(a.node), d, s, a.bin_width, a.max_levels)?;
            HeterogeneitySpec { node: a.node, bin_width: a.bin_width, differences: plan.differences }
        }
        _ => unreachable!("clap enforces --spec or --target-d/--target-s"),
    };
    if spec.node != a.node {
        return Err(Error::Spec(format!("spec is for node {}, --node is {}", spec.node, a.node)).into());
    }
    let clamped = clamped_count(&graph, &spec);
    if clamped > 0 {
        log::warn!("{clamped} weight(s) clamped to [0, 1]");
    }
    let out = inject_heterogeneity(&graph, &spec)?;
    let m = node_metrics(&out, a.node, spec.bin_width)?;
    save_graph(&out, &a.out)?;
    log::info!("node {}: D = {}, S = {}", a.node, m.d_value, m.entropy);
    Ok(())
}

fn metrics(a: MetricsArgs) -> CmdResult {
    let graph = load_graph(&a.graph)?;
    let m = node_metrics(&graph, a.node, a.bin_width)?;
    let mut out = String::from("node,d_value,entropy,bin,center,mass\n");
    for (&bin, &mass) in &m.distribution.masses {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            a.node,
            fmt_f64(m.d_value),
            fmt_f64(m.entropy),
            bin,
            fmt_f64(m.distribution.bin_center(bin)),
            fmt_f64(mass)
        );
    }
    print!("{out}");
    Ok(())
}

fn trace_text(trace: &InfectionTrace) -> String {
    let mut out = String::new();
    for (t, nodes) in trace.steps().iter().enumerate() {
        let _ = write!(out, "{t}:");
        for n in nodes {
            let _ = write!(out, " {n}");
        }
        out.push('\n');
    }
    out
}

fn parse_trace(text: &str, n_nodes: usize) -> Result<InfectionTrace, Error> {
    let mut steps = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let bad = |msg: String| Error::Parse { line: line_no + 1, msg };
        let (t, rest) = line.split_once(':').ok_or_else(|| bad("expected `t: nodes`".into()))?;
        let t: usize = t.trim().parse().map_err(|e| bad(format!("bad step: {e}")))?;
        if t != steps.len() {
            return Err(bad(format!("expected step {}, found {t}", steps.len())));
        }
        let mut row = vec![false; n_nodes];
        for tok in rest.split_whitespace() {
            let i: usize = tok.parse().map_err(|e| bad(format!("bad node {tok:?}: {e}")))?;
            if i >= n_nodes {
                return Err(bad(format!("node {i} out of range")));
            }
            row[i] = true;
        }
        steps.push(row);
    }
    InfectionTrace::from_indicators(&steps)
}

fn run_cmd(a: RunArgs) -> CmdResult {
    let graph = load_graph(&a.graph)?;
    let rng_seed = a.rng_seed.unwrap_or_else(rand::random);
    if a.rng_seed.is_none() {
        log::info!("no --rng-seed given; using {rng_seed}");
    }
    let stop = match a.stop {
        Stop::Extinction => StopPolicy::AtExtinction,
        Stop::Horizon => StopPolicy::FullHorizon,
    };
    let record = run(&graph, a.seed_node, a.tmax, &mut SimRng::seed_from_u64(rng_seed), stop)?;
    let history = record.history.as_ref().expect("run records history");
    let total = record.final_state.total_walkers() as f64;

    let mut csv = String::from("t,node,I,walkers,eta\n");
    for (t, walkers) in history.iter().enumerate() {
        let infected = record.trace.indicator(t)?;
        for (i, &w) in walkers.iter().enumerate() {
            if a.summary && !infected[i] {
                continue;
            }
            let _ = writeln!(csv, "{t},{i},{},{w},{}", u8::from(infected[i]), fmt_f64(w as f64 / total));
        }
    }
    let trace = trace_text(&record.trace);
    let graph_text = to_json_string(&graph);

    std::fs::create_dir_all(&a.out)?;
    write_atomic(&a.out.join("run.csv"), csv.as_bytes())?;
    write_atomic(&a.out.join("trace.txt"), trace.as_bytes())?;
    write_atomic(&a.out.join("graph.json"), graph_text.as_bytes())?;
    let config = json!({
        "graph": a.graph.display().to_string(),
        "graph_fingerprint": graph.fingerprint(),
        "seed_node": a.seed_node,
        "t_max": a.tmax,
        "rng_seed": rng_seed,
        "stop": match a.stop { Stop::Extinction => "extinction", Stop::Horizon => "horizon" },
        "summary_rows": a.summary,
        "extinct_at": record.extinct_at,
    });
    write_manifest(
        &a.out,
        "run",
        config,
        &[("run.csv", csv.as_bytes()), ("trace.txt", trace.as_bytes()), ("graph.json", graph_text.as_bytes())],
    )?;
    log::info!(
        "{} steps, extinct at {:?}, {} node(s) ever infected",
        record.trace.len() - 1,
        record.extinct_at,
        record.trace.cumulative().iter().filter(|&&c| c > 0).count()
    );
    Ok(())
}

fn parse_history(text: &str, steps: usize, n_nodes: usize) -> Result<Vec<Vec<u64>>, Error> {
    let mut history = vec![vec![0u64; n_nodes]; steps];
    let mut seen = 0usize;
    for (line_no, line) in text.lines().enumerate().skip(1) {
        let bad = |msg: String| Error::Parse { line: line_no + 1, msg };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", f.len())));
        }
        let t: usize = f[0].parse().map_err(|e| bad(format!("bad t: {e}")))?;
        let i: usize = f[1].parse().map_err(|e| bad(format!("bad node: {e}")))?;
        let w: u64 = f[3].parse().map_err(|e| bad(format!("bad walkers: {e}")))?;
        if t >= steps || i >= n_nodes {
            return Err(bad(format!("row (t {t}, node {i}) outside the run")));
        }
        history[t][i] = w;
        seen += 1;
    }
    if seen != steps * n_nodes {
        return Err(Error::Validation(format!("run.csv has {seen} rows, expected {}", steps * n_nodes)));
    }
    Ok(history)
}

fn analyze(a: AnalyzeArgs) -> CmdResult {
    if !(0.0..=1.0).contains(&a.pr_threshold) {
        return Err(Error::InvalidParameter(format!("--pr-threshold {} must lie in [0, 1]", a.pr_threshold)).into());
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.run.join("manifest.json"))?)
        .map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
    let cfg = &manifest["config"];
    let field = |name: &str| {
        cfg[name]
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| Error::Validation(format!("manifest lacks config.{name}")))
    };
    let (seed_node, t_max) = (field("seed_node")?, field("t_max")?);
    let graph = load_graph(&a.run.join("graph.json"))?;
    let trace = parse_trace(&std::fs::read_to_string(a.run.join("trace.txt"))?, graph.n_nodes())?;
    let m = outcome_metrics_from_trace(&trace, &graph, seed_node, a.pr_threshold)?;

    let t_last = trace.len() - 1;
    let outcome = format!(
        "t,pr,diam,extinct_at,outbreak,pr_threshold\n{t_last},{},{},{},{},{}\n",
        fmt_f64(m.pr),
        fmt_f64(m.diam),
        m.extinct_at.map(|t| t.to_string()).unwrap_or_default(),
        m.outbreak,
        fmt_f64(a.pr_threshold)
    );
    write_atomic(&a.run.join("outcome.csv"), outcome.as_bytes())?;

    let report = if cfg["summary_rows"].as_bool() == Some(true) {
        "bounds not checked: run.csv holds summary rows only\n".to_string()
    } else {
        let history = parse_history(&std::fs::read_to_string(a.run.join("run.csv"))?, trace.len(), graph.n_nodes())?;
        check_bounds_history(&history, &trace, t_max, &graph)?.render()
    };
    write_atomic(&a.run.join("bounds_report.txt"), report.as_bytes())?;
    print!("{outcome}");
    Ok(())
}

fn sweep(a: SweepArgs) -> CmdResult {
    let config = SweepConfig::load(&a.config)?;
    let workers = match a.workers {
        Some(w) => w,
        None => match std::env::var("EPIWALK_WORKERS") {
            Ok(v) => v
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("EPIWALK_WORKERS = {v:?} is not a count")))?,
            Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        },
    };
    if workers == 0 {
        return Err(Error::InvalidParameter("worker count must be positive".into()).into());
    }
    let result = run_sweep_with_workers(&config, workers)?;
    let paths = export_surfaces(&result, &a.out)?;
    log::info!("wrote {} files to {}", paths.len(), a.out.display());
    Ok(())
}

fn verify(a: VerifyArgs) -> CmdResult {
    let graph = load_graph(&a.graph)?;
    let report = epiwalk_core::verify::verify(&graph, a.tmax, a.trials, a.rng_seed)?;
    print!("{}", report.render());
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Checks(format!("violated: {}", report.failed().join(", "))))
    }
}
