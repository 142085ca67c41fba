//! Measurement metrics and the seeded scenario drivers behind each
//! experiment: communication cost, the poll-all sweep, solver overhead,
//! measurement accuracy under packet loss, and flow churn.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::churn::{ChurnError, ChurnState};
use crate::model::{covers, scheme_cost, CostModel, Flow, FlowId, FlowsAt, ModelError, PollingScheme, SwitchId, Topology};
use crate::optimizer::{construct_weighted_sets, decode_scheme, greedy_cover, OptimizeError};
use crate::simkit::{
    default_er_probability, gen_erdos_renyi, gen_flows, gen_waxman, mark_loss_switches, simulate_counters,
    CounterTable, FlowGenerator, RngSeed, SimError, WAXMAN_ALPHA, WAXMAN_BETA,
};

#[derive(Debug, Error, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Churn(#[from] ChurnError),
    #[error("flow {0} is not covered by the polling scheme")]
    Uncovered(FlowId),
    #[error("no counter for flow {flow} at switch {switch}")]
    MissingCounter { flow: FlowId, switch: SwitchId },
}

// Sub-stream tags so each stage of a run draws from its own stream.
const STREAM_TOPO: u64 = 1;
const STREAM_FLOWS: u64 = 2;
const STREAM_LOSS_SWITCHES: u64 = 3;
const STREAM_COUNTERS: u64 = 4;
const STREAM_CHURN: u64 = 5;
const STREAM_ARRIVALS: u64 = 6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TopologyKind {
    /// `p: None` selects [`default_er_probability`].
    ErdosRenyi { p: Option<f64> },
    Waxman { alpha: f64, beta: f64 },
}

impl TopologyKind {
    pub fn er() -> Self {
        TopologyKind::ErdosRenyi { p: None }
    }

    pub fn waxman() -> Self {
        TopologyKind::Waxman {
            alpha: WAXMAN_ALPHA,
            beta: WAXMAN_BETA,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TopologyKind::ErdosRenyi { .. } => "er",
            TopologyKind::Waxman { .. } => "waxman",
        }
    }

    pub fn generate(&self, n: usize, seed: RngSeed) -> Result<Topology, SimError> {
        match *self {
            TopologyKind::ErdosRenyi { p } => gen_erdos_renyi(n, p.unwrap_or_else(|| default_er_probability(n)), seed),
            TopologyKind::Waxman { alpha, beta } => gen_waxman(n, alpha, beta, seed),
        }
    }
}

/// Inputs shared by every scenario.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Setup {
    pub kind: TopologyKind,
    pub n: usize,
    pub volume_range: (u64, u64),
    pub model: CostModel,
}

impl Setup {
    pub fn new(kind: TopologyKind, n: usize) -> Self {
        Setup {
            kind,
            n,
            volume_range: crate::simkit::DEFAULT_VOLUME_RANGE,
            model: CostModel::default(),
        }
    }

    pub fn topology(&self, seed: RngSeed) -> Result<Topology, SimError> {
        self.kind.generate(self.n, seed.derive(STREAM_TOPO))
    }

    pub fn flows(&self, topo: &Topology, m: usize, seed: RngSeed) -> Result<Vec<Flow>, SimError> {
        gen_flows(topo, m, self.volume_range, seed.derive(STREAM_FLOWS).derive(m as u64))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FlowMeasurement {
    pub flow: FlowId,
    pub real_bytes: u64,
    pub measured_bytes: u64,
    pub polled_switch: SwitchId,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementReport {
    pub flows: Vec<FlowMeasurement>,
    pub afr: f64,
    pub tm_accuracy: f64,
    pub total_cost_bytes: u64,
    pub baseline_cost_bytes: u64,
}

/// The switch whose counter is read for `flow`: its single-poll switch if it
/// has one, otherwise the first polled switch along its path.
pub fn polled_switch(scheme: &PollingScheme, flow: &Flow) -> Option<SwitchId> {
    scheme
        .single_polls
        .get(&flow.id)
        .copied()
        .or_else(|| flow.path.iter().copied().find(|s| scheme.poll_all.contains(s)))
}

/// Compares what the scheme would read against what each flow really sent.
///
/// AFR is the fraction of flows read byte-exact. TM accuracy is one minus
/// the total absolute error over the total real volume. Both are 1 for an
/// empty flow set.
pub fn measure(
    scheme: &PollingScheme,
    counters: &CounterTable,
    flows: &[Flow],
    model: &CostModel,
    switch_count: usize,
) -> Result<MeasurementReport, ExperimentError> {
    let mut per_flow = Vec::with_capacity(flows.len());
    let (mut exact, mut abs_err, mut real_total) = (0usize, 0u128, 0u128);
    for f in flows {
        let polled = polled_switch(scheme, f).ok_or(ExperimentError::Uncovered(f.id))?;
        let measured = counters
            .get(polled, f.id)
            .ok_or(ExperimentError::MissingCounter { flow: f.id, switch: polled })?;
        if measured == f.volume_bytes {
            exact += 1;
        }
        abs_err += u128::from(measured.abs_diff(f.volume_bytes));
        real_total += u128::from(f.volume_bytes);
        per_flow.push(FlowMeasurement {
            flow: f.id,
            real_bytes: f.volume_bytes,
            measured_bytes: measured,
            polled_switch: polled,
        });
    }
    let afr = if flows.is_empty() { 1.0 } else { exact as f64 / flows.len() as f64 };
    let tm_accuracy = if real_total == 0 {
        1.0
    } else {
        (1.0 - abs_err as f64 / real_total as f64).max(0.0)
    };
    let at = FlowsAt::from_flows(switch_count, flows);
    Ok(MeasurementReport {
        flows: per_flow,
        afr,
        tm_accuracy,
        total_cost_bytes: scheme_cost(model, scheme, &at)?,
        baseline_cost_bytes: model.per_flow_baseline_cost(flows.len() as u64),
    })
}

/// Greedy scheme plus its cost for a flow set.
fn solve(topo: &Topology, flows: &[Flow], model: &CostModel) -> Result<(PollingScheme, u64), ExperimentError> {
    let system = construct_weighted_sets(topo, flows, model)?;
    let solution = greedy_cover(&system)?;
    let scheme = decode_scheme(&system, &solution, flows)?;
    let cost = scheme_cost(model, &scheme, &FlowsAt::from_flows(topo.switch_count(), flows))?;
    Ok((scheme, cost))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostRecord {
    pub seed: u64,
    pub topology: String,
    pub n: usize,
    pub m: usize,
    pub flowcover_cost: u64,
    pub baseline_cost: u64,
    pub savings: f64,
}

/// One topology per seed; one flow set per entry of `ms`.
pub fn run_cost_experiment(setup: &Setup, ms: &[usize], seed: RngSeed) -> Result<Vec<CostRecord>, ExperimentError> {
    let topo = setup.topology(seed)?;
    ms.iter()
        .map(|&m| {
            let flows = setup.flows(&topo, m, seed)?;
            let (_, cost) = solve(&topo, &flows, &setup.model)?;
            let baseline = setup.model.per_flow_baseline_cost(m as u64);
            Ok(CostRecord {
                seed: seed.0,
                topology: setup.kind.name().to_string(),
                n: setup.n,
                m,
                flowcover_cost: cost,
                baseline_cost: baseline,
                savings: if baseline == 0 { 0.0 } else { 1.0 - cost as f64 / baseline as f64 },
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SweepRecord {
    pub seed: u64,
    pub k: usize,
    pub total_cost: u64,
    pub baseline_cost: u64,
}

/// Cost of polling the `k` switches that greedily cover the most uncovered
/// flows (ties to the lower id) and single-polling the rest, for k = 0..=n.
pub fn poll_all_sweep(topo: &Topology, flows: &[Flow], model: &CostModel) -> Vec<(usize, u64)> {
    let n = topo.switch_count();
    let at = FlowsAt::from_flows(n, flows);
    let by_id: HashMap<FlowId, &Flow> = flows.iter().map(|f| (f.id, f)).collect();
    let mut uncovered_at: Vec<usize> = (0..n).map(|v| at.count(SwitchId(v as u32)).unwrap_or(0)).collect();
    let mut covered: HashMap<FlowId, bool> = HashMap::with_capacity(flows.len());
    let mut chosen = vec![false; n];
    let mut uncovered = flows.len() as u64;
    let mut polled_cost = 0;
    let single = model.query_cost(1);
    let mut out = vec![(0, uncovered * single)];
    for k in 1..=n {
        let v = (0..n)
            .filter(|&v| !chosen[v])
            .max_by(|&a, &b| uncovered_at[a].cmp(&uncovered_at[b]).then(b.cmp(&a)))
            .expect("k <= n");
        chosen[v] = true;
        let sw = SwitchId(v as u32);
        polled_cost += model.query_cost(at.count(sw).unwrap_or(0) as u64);
        for fid in at.get(sw).into_iter().flatten() {
            if !covered.insert(*fid, true).unwrap_or(false) {
                uncovered -= 1;
                for s in &by_id[fid].path {
                    uncovered_at[s.index()] -= 1;
                }
            }
        }
        out.push((k, polled_cost + uncovered * single));
    }
    out
}

pub fn run_poll_all_sweep(setup: &Setup, m: usize, seed: RngSeed) -> Result<Vec<SweepRecord>, ExperimentError> {
    let topo = setup.topology(seed)?;
    let flows = setup.flows(&topo, m, seed)?;
    let baseline = setup.model.per_flow_baseline_cost(m as u64);
    Ok(poll_all_sweep(&topo, &flows, &setup.model)
        .into_iter()
        .map(|(k, total_cost)| SweepRecord {
            seed: seed.0,
            k,
            total_cost,
            baseline_cost: baseline,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverheadRecord {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub sets: usize,
    pub cover_weight: u64,
    pub construct_secs: f64,
    pub solve_secs: f64,
    pub total_secs: f64,
}

/// Wall-clock time of set construction and greedy solving for every
/// `(n, m)` pair. Each pair is timed `repeats` times and the fastest run kept.
pub fn run_overhead_experiment(
    setup: &Setup,
    ns: &[usize],
    ms: &[usize],
    repeats: usize,
    seed: RngSeed,
) -> Result<Vec<OverheadRecord>, ExperimentError> {
    let mut out = Vec::new();
    for &n in ns {
        let sized = Setup { n, ..*setup };
        let topo = sized.topology(seed)?;
        for &m in ms {
            let flows = sized.flows(&topo, m, seed)?;
            let (mut best_build, mut best_solve) = (f64::INFINITY, f64::INFINITY);
            let mut shape = (0, 0);
            for _ in 0..repeats.max(1) {
                let t0 = Instant::now();
                let system = construct_weighted_sets(&topo, &flows, &setup.model)?;
                let t1 = Instant::now();
                let solution = greedy_cover(&system)?;
                let t2 = Instant::now();
                best_build = best_build.min((t1 - t0).as_secs_f64());
                best_solve = best_solve.min((t2 - t1).as_secs_f64());
                shape = (system.sets().len(), solution.total_weight);
            }
            out.push(OverheadRecord {
                seed: seed.0,
                n,
                m,
                sets: shape.0,
                cover_weight: shape.1,
                construct_secs: best_build,
                solve_secs: best_solve,
                total_secs: best_build + best_solve,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccuracyRecord {
    pub seed: u64,
    pub topology: String,
    pub n: usize,
    pub m: usize,
    pub loss_rate: f64,
    pub loss_switch_ratio: f64,
    pub afr: f64,
    pub tm_accuracy: f64,
    pub flowcover_cost: u64,
    pub baseline_cost: u64,
}

pub fn run_accuracy_experiment(
    setup: &Setup,
    m: usize,
    loss_rate: f64,
    loss_switch_ratio: f64,
    seed: RngSeed,
) -> Result<AccuracyRecord, ExperimentError> {
    let topo = setup.topology(seed)?;
    let topo = mark_loss_switches(&topo, loss_switch_ratio, seed.derive(STREAM_LOSS_SWITCHES))?;
    let flows = setup.flows(&topo, m, seed)?;
    let (scheme, _) = solve(&topo, &flows, &setup.model)?;
    let counters = simulate_counters(&topo, &flows, loss_rate, seed.derive(STREAM_COUNTERS))?;
    let report = measure(&scheme, &counters, &flows, &setup.model, topo.switch_count())?;
    Ok(AccuracyRecord {
        seed: seed.0,
        topology: setup.kind.name().to_string(),
        n: setup.n,
        m,
        loss_rate,
        loss_switch_ratio,
        afr: report.afr,
        tm_accuracy: report.tm_accuracy,
        flowcover_cost: report.total_cost_bytes,
        baseline_cost: report.baseline_cost_bytes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChurnParams {
    pub initial_flows: usize,
    pub rounds: u64,
    pub churn_max: usize,
    pub recompute_interval: u64,
}

impl Default for ChurnParams {
    fn default() -> Self {
        ChurnParams {
            initial_flows: 10_000,
            rounds: 60,
            churn_max: 2000,
            recompute_interval: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChurnRecord {
    pub seed: u64,
    pub round: u64,
    pub arrivals: usize,
    pub expiries: usize,
    pub active_flows: usize,
    pub patched_cost: u64,
    pub recompute_cost: u64,
    pub baseline_cost: u64,
    pub uncovered: usize,
}

/// Each round draws arrival and expiry counts uniformly from
/// `0..=churn_max` (expiries capped at the active count), expires uniformly
/// chosen active flows, then admits fresh random flows. One state is patched
/// and recomputed every `recompute_interval` rounds; its twin is recomputed
/// every round. Costs are taken after the round's poll.
pub fn run_churn_experiment(
    setup: &Setup,
    params: &ChurnParams,
    seed: RngSeed,
) -> Result<Vec<ChurnRecord>, ExperimentError> {
    let topo = setup.topology(seed)?;
    let flows = setup.flows(&topo, params.initial_flows, seed)?;
    let model = &setup.model;
    let mut active: Vec<FlowId> = flows.iter().map(|f| f.id).collect();
    let mut patched = ChurnState::fresh(&topo, flows.clone(), model, params.recompute_interval)?;
    let mut fresh = ChurnState::new(patched.scheme().clone(), flows, 1)?;
    let mut rng = seed.derive(STREAM_CHURN).rng();
    let mut arrivals_gen = FlowGenerator::new(&topo, setup.volume_range, seed.derive(STREAM_ARRIVALS))?
        .starting_at(params.initial_flows as u32);

    let mut out = Vec::with_capacity(params.rounds as usize);
    for round in 1..=params.rounds {
        let arrivals = rng.gen_range(0..=params.churn_max);
        let expiries = rng.gen_range(0..=params.churn_max).min(active.len());
        let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, active.len(), expiries).into_vec();
        picks.sort_unstable_by(|a, b| b.cmp(a));
        for i in picks {
            let id = active.swap_remove(i);
            patched.on_flow_expiry(id)?;
            fresh.on_flow_expiry(id)?;
        }
        for _ in 0..arrivals {
            let f = arrivals_gen.next_flow();
            active.push(f.id);
            fresh.on_flow_arrival(f.clone())?;
            patched.on_flow_arrival(f)?;
        }
        patched.maybe_recompute(&topo, model)?;
        fresh.maybe_recompute(&topo, model)?;
        let uncovered = patched
            .active_flows()
            .values()
            .filter(|f| !covers(patched.scheme(), f))
            .count();
        out.push(ChurnRecord {
            seed: seed.0,
            round,
            arrivals,
            expiries,
            active_flows: active.len(),
            patched_cost: patched.cost(model, topo.switch_count())?,
            recompute_cost: fresh.cost(model, topo.switch_count())?,
            baseline_cost: model.per_flow_baseline_cost(active.len() as u64),
            uncovered,
        });
    }
    Ok(out)
}

/// Mean of a column, keyed by a grouping value, in key order.
pub fn group_means<K: Ord + Clone, T>(rows: &[T], key: impl Fn(&T) -> K, value: impl Fn(&T) -> f64) -> Vec<(K, f64)> {
    let mut acc: BTreeMap<K, (f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry(key(r)).or_insert((0.0, 0));
        e.0 += value(r);
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect()
}
