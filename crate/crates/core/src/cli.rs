//! Command-line front end.
//!
//! Every subcommand resolves one [`ExperimentConfig`] from an optional flat
//! `key=value` config file overlaid with command-line flags (flags win), runs,
//! writes its output file and prints a one-line summary.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::experiments::{
    run_accuracy_experiment, run_churn_experiment, run_cost_experiment, run_overhead_experiment,
    run_poll_all_sweep, ChurnParams, ExperimentError, Setup, TopologyKind,
};
use crate::format::{parse_instance, write_instance, write_scheme, write_topology};
use crate::model::{scheme_cost, CostModel, FlowsAt};
use crate::optimizer::{construct_weighted_sets, decode_scheme, exact_cover, greedy_cover};
use crate::simkit::{RngSeed, DEFAULT_VOLUME_RANGE, WAXMAN_ALPHA, WAXMAN_BETA};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FLOWCOVER_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "flowcover", version, about = "Low-cost SDN flow statistics polling: optimizer and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a topology
    GenTopo(Flags),
    /// Generate a topology and flows routed over it
    GenFlows(Flags),
    /// Compute one polling scheme and report its cost
    Solve(Flags),
    /// Cost of polling the k most-covering switches, k = 0..n
    SweepPollall(Flags),
    /// Polling scheme cost against the per-flow baseline
    Cost(Flags),
    /// Set construction and solver wall-clock time
    Overhead(Flags),
    /// Measurement accuracy under packet loss
    Accuracy(Flags),
    /// Patched versus recomputed scheme under flow churn
    Churn(Flags),
}

/// Flags mirror config-file keys one to one. Values stay strings here and are
/// parsed once, together with the config file, in [`ExperimentConfig::from_map`].
#[derive(Debug, Args)]
struct Flags {
    /// Flat key=value config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed (required, here or in the config file)
    #[arg(long)]
    seed: Option<String>,
    /// Output file (default: $FLOWCOVER_OUT_DIR/<subcommand>.<ext>)
    #[arg(long)]
    out: Option<String>,
    /// Emit records as JSON lines instead of CSV
    #[arg(long)]
    json: bool,
    /// Run seeds seed..seed+K-1 and merge records in seed order
    #[arg(long)]
    trials: Option<String>,
    /// Topology model: er or waxman
    #[arg(long = "topo-kind")]
    topo_kind: Option<String>,
    /// Switch count
    #[arg(long)]
    n: Option<String>,
    /// Erdos-Renyi edge probability (default 2 ln n / n)
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// Flow count, or a comma separated list
    #[arg(long)]
    m: Option<String>,
    #[arg(long = "vol-min")]
    vol_min: Option<String>,
    #[arg(long = "vol-max")]
    vol_max: Option<String>,
    /// Packet loss probability at loss switches (list allowed)
    #[arg(long = "loss-rate")]
    loss_rate: Option<String>,
    /// Fraction of switches that lose packets (list allowed)
    #[arg(long = "loss-ratio")]
    loss_ratio: Option<String>,
    #[arg(long)]
    rounds: Option<String>,
    #[arg(long = "churn-max")]
    churn_max: Option<String>,
    #[arg(long = "recompute-interval")]
    recompute_interval: Option<String>,
    #[arg(long = "l-req")]
    l_req: Option<String>,
    #[arg(long = "l-reply-header")]
    l_reply_header: Option<String>,
    #[arg(long = "l-entry")]
    l_entry: Option<String>,
    /// Instance file to solve instead of generating one
    #[arg(long)]
    input: Option<String>,
    /// greedy or exact
    #[arg(long)]
    solver: Option<String>,
    /// Node budget for the exact solver
    #[arg(long)]
    budget: Option<String>,
    /// Switch counts for the overhead switch sweep
    #[arg(long = "n-sweep")]
    n_sweep: Option<String>,
    /// Timing repetitions per overhead point (fastest kept)
    #[arg(long)]
    repeats: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("seed", self.seed.clone()),
            ("out", self.out.clone()),
            ("json", self.json.then(|| "true".to_string())),
            ("trials", self.trials.clone()),
            ("topo-kind", self.topo_kind.clone()),
            ("n", self.n.clone()),
            ("p", self.p.clone()),
            ("alpha", self.alpha.clone()),
            ("beta", self.beta.clone()),
            ("m", self.m.clone()),
            ("vol-min", self.vol_min.clone()),
            ("vol-max", self.vol_max.clone()),
            ("loss-rate", self.loss_rate.clone()),
            ("loss-ratio", self.loss_ratio.clone()),
            ("rounds", self.rounds.clone()),
            ("churn-max", self.churn_max.clone()),
            ("recompute-interval", self.recompute_interval.clone()),
            ("l-req", self.l_req.clone()),
            ("l-reply-header", self.l_reply_header.clone()),
            ("l-entry", self.l_entry.clone()),
            ("input", self.input.clone()),
            ("solver", self.solver.clone()),
            ("budget", self.budget.clone()),
            ("n-sweep", self.n_sweep.clone()),
            ("repeats", self.repeats.clone()),
        ]
    }
}

const KEYS: &[&str] = &[
    "seed", "out", "json", "trials", "topo-kind", "n", "p", "alpha", "beta", "m", "vol-min", "vol-max",
    "loss-rate", "loss-ratio", "rounds", "churn-max", "recompute-interval", "l-req", "l-reply-header",
    "l-entry", "input", "solver", "budget", "n-sweep", "repeats",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    GenTopo,
    GenFlows,
    Solve,
    SweepPollall,
    Cost,
    Overhead,
    Accuracy,
    Churn,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::GenTopo => "gen-topo",
            Scenario::GenFlows => "gen-flows",
            Scenario::Solve => "solve",
            Scenario::SweepPollall => "sweep-pollall",
            Scenario::Cost => "cost",
            Scenario::Overhead => "overhead",
            Scenario::Accuracy => "accuracy",
            Scenario::Churn => "churn",
        }
    }

    fn produces_records(self) -> bool {
        !matches!(self, Scenario::GenTopo | Scenario::GenFlows | Scenario::Solve)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    Greedy,
    Exact,
}

/// Everything a run depends on. Together with the binary version it fixes
/// every output byte (timings aside).
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub trials: u64,
    pub topo_kind: TopologyKind,
    pub n: usize,
    pub m: Vec<usize>,
    pub volume_range: (u64, u64),
    pub loss_rate: Vec<f64>,
    pub loss_ratio: Vec<f64>,
    pub churn: ChurnParams,
    pub model: CostModel,
    pub input: Option<PathBuf>,
    pub solver: Solver,
    pub budget: u64,
    pub n_sweep: Vec<usize>,
    pub repeats: usize,
    pub out: Option<PathBuf>,
    pub json: bool,
}

/// Parses a flat `key=value` file. Blank lines and `#` comments are skipped.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key=value", i + 1)))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(usage(format!("config line {}: unknown key `{k}`", i + 1)));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, CliError> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| usage(format!("invalid value `{v}` for --{key}"))),
    }
}

fn get_list<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: Vec<T>) -> Result<Vec<T>, CliError> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => {
            let items = v
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| usage(format!("invalid value `{s}` in --{key}"))))
                .collect::<Result<Vec<T>, _>>()?;
            if items.is_empty() {
                return Err(usage(format!("--{key} needs at least one value")));
            }
            Ok(items)
        }
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn from_map(scenario: Scenario, map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let seed = map
            .get("seed")
            .ok_or_else(|| usage("--seed is required"))?
            .parse()
            .map_err(|_| usage("--seed must be an unsigned 64-bit integer"))?;
        let n = get(map, "n", if scenario == Scenario::SweepPollall { 100 } else { 200 })?;
        let topo_kind = match map.get("topo-kind").map(String::as_str).unwrap_or("er") {
            "er" => TopologyKind::ErdosRenyi {
                p: map.get("p").map(|_| get(map, "p", 0.0)).transpose()?,
            },
            "waxman" => TopologyKind::Waxman {
                alpha: get(map, "alpha", WAXMAN_ALPHA)?,
                beta: get(map, "beta", WAXMAN_BETA)?,
            },
            other => return Err(usage(format!("unknown topology kind `{other}` (er or waxman)"))),
        };
        let default_m = match scenario {
            Scenario::Cost => vec![1000, 5000, 10_000, 20_000, 50_000, 100_000],
            Scenario::Overhead => (1..=10).map(|i| i * 10_000).collect(),
            Scenario::GenFlows => vec![1000],
            _ => vec![20_000],
        };
        let m = get_list(map, "m", default_m)?;
        let defaults = CostModel::default();
        let model = CostModel::new(
            get(map, "l-req", defaults.l_req)?,
            get(map, "l-reply-header", defaults.l_reply_header)?,
            get(map, "l-entry", defaults.l_single_flow_entry)?,
        )
        .map_err(|e| usage(e.to_string()))?;
        let churn_defaults = ChurnParams::default();
        let churn = ChurnParams {
            initial_flows: if scenario == Scenario::Churn && map.contains_key("m") {
                m[0]
            } else {
                churn_defaults.initial_flows
            },
            rounds: get(map, "rounds", churn_defaults.rounds)?,
            churn_max: get(map, "churn-max", churn_defaults.churn_max)?,
            recompute_interval: get(map, "recompute-interval", churn_defaults.recompute_interval)?,
        };
        if churn.recompute_interval == 0 {
            return Err(usage("--recompute-interval must be at least 1"));
        }
        let solver = match map.get("solver").map(String::as_str).unwrap_or("greedy") {
            "greedy" => Solver::Greedy,
            "exact" => Solver::Exact,
            other => return Err(usage(format!("unknown solver `{other}` (greedy or exact)"))),
        };
        let trials = get(map, "trials", 1u64)?;
        if trials == 0 {
            return Err(usage("--trials must be at least 1"));
        }
        if trials > 1 && !scenario.produces_records() {
            return Err(usage(format!("--trials is not supported by {}", scenario.name())));
        }
        let volume_range = (
            get(map, "vol-min", DEFAULT_VOLUME_RANGE.0)?,
            get(map, "vol-max", DEFAULT_VOLUME_RANGE.1)?,
        );
        if volume_range.0 == 0 || volume_range.0 > volume_range.1 {
            return Err(usage("volume range needs 0 < vol-min <= vol-max"));
        }
        let config = ExperimentConfig {
            scenario,
            seed,
            trials,
            topo_kind,
            n,
            m,
            volume_range,
            loss_rate: get_list(map, "loss-rate", vec![0.01])?,
            loss_ratio: get_list(map, "loss-ratio", vec![0.1])?,
            churn,
            model,
            input: map.get("input").map(PathBuf::from),
            solver,
            budget: get(map, "budget", 1_000_000)?,
            n_sweep: get_list(map, "n-sweep", vec![50, 100, 200, 300, 400])?,
            repeats: get(map, "repeats", 3)?,
            out: map.get("out").map(PathBuf::from),
            json: get(map, "json", false)?,
        };
        if config.n < 2 {
            return Err(usage("--n must be at least 2"));
        }
        for &r in config.loss_rate.iter().chain(&config.loss_ratio) {
            if !(0.0..=1.0).contains(&r) {
                return Err(usage(format!("loss parameter {r} not in [0, 1]")));
            }
        }
        Ok(config)
    }

    /// Canonical `key=value` rendering; feeding it back through
    /// [`parse_config_file`] and [`ExperimentConfig::from_map`] gives the same
    /// config.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("seed", self.seed.to_string());
        kv("trials", self.trials.to_string());
        match self.topo_kind {
            TopologyKind::ErdosRenyi { p } => {
                kv("topo-kind", "er".into());
                if let Some(p) = p {
                    kv("p", format!("{p:?}"));
                }
            }
            TopologyKind::Waxman { alpha, beta } => {
                kv("topo-kind", "waxman".into());
                kv("alpha", format!("{alpha:?}"));
                kv("beta", format!("{beta:?}"));
            }
        }
        kv("n", self.n.to_string());
        if self.scenario == Scenario::Churn {
            kv("m", self.churn.initial_flows.to_string());
        } else {
            kv("m", join(&self.m));
        }
        kv("vol-min", self.volume_range.0.to_string());
        kv("vol-max", self.volume_range.1.to_string());
        kv("loss-rate", self.loss_rate.iter().map(|r| format!("{r:?}")).collect::<Vec<_>>().join(","));
        kv("loss-ratio", self.loss_ratio.iter().map(|r| format!("{r:?}")).collect::<Vec<_>>().join(","));
        kv("rounds", self.churn.rounds.to_string());
        kv("churn-max", self.churn.churn_max.to_string());
        kv("recompute-interval", self.churn.recompute_interval.to_string());
        kv("l-req", self.model.l_req.to_string());
        kv("l-reply-header", self.model.l_reply_header.to_string());
        kv("l-entry", self.model.l_single_flow_entry.to_string());
        if let Some(input) = &self.input {
            kv("input", input.display().to_string());
        }
        kv("solver", match self.solver {
            Solver::Greedy => "greedy".into(),
            Solver::Exact => "exact".into(),
        });
        kv("budget", self.budget.to_string());
        kv("n-sweep", join(&self.n_sweep));
        kv("repeats", self.repeats.to_string());
        if let Some(out_path) = &self.out {
            kv("out", out_path.display().to_string());
        }
        kv("json", self.json.to_string());
        out
    }

    fn setup(&self) -> Setup {
        Setup {
            kind: self.topo_kind,
            n: self.n,
            volume_range: self.volume_range,
            model: self.model,
        }
    }

    fn seeds(&self) -> Vec<RngSeed> {
        (0..self.trials).map(|i| RngSeed(self.seed.wrapping_add(i))).collect()
    }

    fn output_path(&self) -> PathBuf {
        if let Some(p) = &self.out {
            return p.clone();
        }
        let ext = if !self.scenario.produces_records() {
            "txt"
        } else if self.json {
            "jsonl"
        } else {
            "csv"
        };
        let dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
        dir.join(format!("{}.{ext}", self.scenario.name()))
    }
}

fn render_records<R: Serialize>(records: &[R], json: bool) -> Result<String, CliError> {
    if json {
        let mut out = String::new();
        for r in records {
            out.push_str(&serde_json::to_string(r).map_err(runtime)?);
            out.push('\n');
        }
        Ok(out)
    } else {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in records {
            w.serialize(r).map_err(runtime)?;
        }
        String::from_utf8(w.into_inner().map_err(runtime)?).map_err(runtime)
    }
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

/// Runs `f` for every trial seed in parallel and concatenates in seed order.
fn per_seed<R: Send>(
    config: &ExperimentConfig,
    f: impl Fn(RngSeed) -> Result<Vec<R>, ExperimentError> + Sync + Send,
) -> Result<Vec<R>, CliError> {
    let batches: Vec<Result<Vec<R>, ExperimentError>> = config.seeds().into_par_iter().map(&f).collect();
    let mut out = Vec::new();
    for b in batches {
        out.extend(b?);
    }
    Ok(out)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if c == 0 {
        0.0
    } else {
        s / c as f64
    }
}

/// Executes a resolved config. Returns the path written and the summary line.
pub fn execute(config: &ExperimentConfig) -> Result<(PathBuf, String), CliError> {
    let path = config.output_path();
    let setup = config.setup();
    let seed = RngSeed(config.seed);
    let (contents, summary) = match config.scenario {
        Scenario::GenTopo => {
            let topo = setup.topology(seed).map_err(runtime)?;
            let summary = format!("topology {} n={} links={}", setup.kind.name(), topo.switch_count(), topo.links().len());
            (write_topology(&topo), summary)
        }
        Scenario::GenFlows => {
            let topo = setup.topology(seed).map_err(runtime)?;
            let flows = setup.flows(&topo, config.m[0], seed).map_err(runtime)?;
            let summary = format!("{} flows over {} n={}", flows.len(), setup.kind.name(), topo.switch_count());
            (write_instance(&topo, &flows), summary)
        }
        Scenario::Solve => solve(config, &setup, seed)?,
        Scenario::SweepPollall => {
            let recs = per_seed(config, |s| run_poll_all_sweep(&setup, config.m[0], s))?;
            let best = recs.iter().min_by_key(|r| (r.seed, r.total_cost)).expect("k = 0 always present");
            let summary = format!(
                "{} records; minimum cost {} at k={} (baseline {})",
                recs.len(),
                best.total_cost,
                best.k,
                best.baseline_cost
            );
            (render_records(&recs, config.json)?, summary)
        }
        Scenario::Cost => {
            let recs = per_seed(config, |s| run_cost_experiment(&setup, &config.m, s))?;
            let summary = format!(
                "{} records; mean savings {:.2}%",
                recs.len(),
                100.0 * mean(recs.iter().map(|r| r.savings))
            );
            (render_records(&recs, config.json)?, summary)
        }
        Scenario::Overhead => {
            let recs = per_seed(config, |s| {
                let mut r = run_overhead_experiment(&setup, &[config.n], &config.m, config.repeats, s)?;
                r.extend(run_overhead_experiment(&setup, &config.n_sweep, &[20_000], config.repeats, s)?);
                Ok(r)
            })?;
            let worst = recs.iter().map(|r| r.total_secs).fold(0.0, f64::max);
            let summary = format!("{} records; slowest construct+solve {:.3} s", recs.len(), worst);
            (render_records(&recs, config.json)?, summary)
        }
        Scenario::Accuracy => {
            let recs = per_seed(config, |s| {
                let mut out = Vec::new();
                for &m in &config.m {
                    for &rate in &config.loss_rate {
                        for &ratio in &config.loss_ratio {
                            out.push(run_accuracy_experiment(&setup, m, rate, ratio, s)?);
                        }
                    }
                }
                Ok(out)
            })?;
            let summary = format!(
                "{} records; mean afr {:.4}, mean tm accuracy {:.5}",
                recs.len(),
                mean(recs.iter().map(|r| r.afr)),
                mean(recs.iter().map(|r| r.tm_accuracy))
            );
            (render_records(&recs, config.json)?, summary)
        }
        Scenario::Churn => {
            let recs = per_seed(config, |s| run_churn_experiment(&setup, &config.churn, s))?;
            let worst = recs
                .iter()
                .map(|r| r.patched_cost as f64 / r.recompute_cost.max(1) as f64)
                .fold(0.0, f64::max);
            let uncovered: usize = recs.iter().map(|r| r.uncovered).sum();
            let summary = format!(
                "{} records; worst patched/recompute ratio {:.4}; uncovered flows {}",
                recs.len(),
                worst,
                uncovered
            );
            (render_records(&recs, config.json)?, summary)
        }
    };
    write_output(&path, &contents)?;
    Ok((path, summary))
}

fn solve(config: &ExperimentConfig, setup: &Setup, seed: RngSeed) -> Result<(String, String), CliError> {
    let (topo, flows) = match &config.input {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| runtime(format!("{}: {e}", p.display())))?;
            let inst = parse_instance(&text).map_err(|e| runtime(format!("{}: {e}", p.display())))?;
            (inst.topo, inst.flows)
        }
        None => {
            let topo = setup.topology(seed).map_err(runtime)?;
            let flows = setup.flows(&topo, config.m[0], seed).map_err(runtime)?;
            (topo, flows)
        }
    };
    let system = construct_weighted_sets(&topo, &flows, &config.model).map_err(runtime)?;
    let (solution, note) = match config.solver {
        Solver::Greedy => (greedy_cover(&system).map_err(runtime)?, String::new()),
        Solver::Exact => {
            let r = exact_cover(&system, config.budget).map_err(runtime)?;
            let note = if r.proven { " (optimal)" } else { " (budget exhausted, not proven optimal)" };
            (r.solution, note.to_string())
        }
    };
    let scheme = decode_scheme(&system, &solution, &flows).map_err(runtime)?;
    let cost = scheme_cost(&config.model, &scheme, &FlowsAt::from_flows(topo.switch_count(), &flows)).map_err(runtime)?;
    let baseline = config.model.per_flow_baseline_cost(flows.len() as u64);
    let savings = if baseline == 0 { 0.0 } else { 100.0 * (1.0 - cost as f64 / baseline as f64) };
    let summary = format!(
        "flowcover {cost} bytes vs per-flow baseline {baseline} bytes, savings {savings:.2}%{note}; poll-all {} switches, {} single polls",
        scheme.poll_all.len(),
        scheme.single_polls.len()
    );
    Ok((write_scheme(&scheme), summary))
}

fn resolve(command: Command) -> Result<ExperimentConfig, CliError> {
    let (scenario, flags) = match command {
        Command::GenTopo(f) => (Scenario::GenTopo, f),
        Command::GenFlows(f) => (Scenario::GenFlows, f),
        Command::Solve(f) => (Scenario::Solve, f),
        Command::SweepPollall(f) => (Scenario::SweepPollall, f),
        Command::Cost(f) => (Scenario::Cost, f),
        Command::Overhead(f) => (Scenario::Overhead, f),
        Command::Accuracy(f) => (Scenario::Accuracy, f),
        Command::Churn(f) => (Scenario::Churn, f),
    };
    let mut map = match &flags.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            parse_config_file(&text)?
        }
        None => BTreeMap::new(),
    };
    for (k, v) in flags.pairs() {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    }
    ExperimentConfig::from_map(scenario, &map)
}

/// Parses `args` (program name first), runs, and returns the exit status.
/// The summary goes to stdout and diagnostics to stderr.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match resolve(cli.command).and_then(|c| execute(&c)) {
        Ok((path, summary)) => {
            println!("{summary} -> {}", path.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("flowcover: {e}");
            e.exit_code()
        }
    }
}
