//! Weighted set cover formulation of the polling problem and its solvers.
//!
//! Every switch that carries at least one flow yields a poll-all candidate
//! set; every flow yields a singleton candidate. A set's weight is the
//! request plus reply bytes of the query it stands for. The cheapest cover of
//! all flows decodes into the cheapest polling scheme.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::format::FormatError;
use crate::model::{CostModel, Flow, FlowId, ModelError, PollingScheme, SwitchId, Topology};

#[derive(Debug, Error, PartialEq)]
pub enum OptimizeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("flow {0} is not contained in any candidate set")]
    Uncoverable(FlowId),
    #[error("candidate set {set} contains flow {flow}, which is not in the universe")]
    OutsideUniverse { set: usize, flow: FlowId },
    #[error("candidate set {0} has a single-flow action but does not hold exactly that flow")]
    BadSingleton(usize),
    #[error("candidate set {set}: weight {found} differs from the cost model's {expected}")]
    WeightMismatch { set: usize, expected: u64, found: u64 },
    #[error("poll-all set for switch {0} does not match the flows routed through it")]
    PollAllMismatch(SwitchId),
    #[error("flow {0} has no singleton candidate set")]
    MissingSingleton(FlowId),
    #[error("solution refers to set index {0}, which does not exist")]
    UnknownSet(usize),
    #[error("solution leaves flow {0} uncovered")]
    IncompleteCover(FlowId),
    #[error("solution weight {claimed} differs from the sum of chosen weights {actual}")]
    WrongTotal { claimed: u64, actual: u64 },
    #[error("flow {0} is not in the flow list")]
    UnknownFlow(FlowId),
}

/// What the controller does when a candidate set is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    /// Wildcard statistics request to one switch.
    PollAll(SwitchId),
    /// Exact-match request for one flow.
    SingleFlow(FlowId),
}

impl Action {
    /// Tie-break rank: poll-all sets are preferred over singles at equal ratio.
    fn rank(self) -> (u8, u32) {
        match self {
            Action::PollAll(s) => (0, s.0),
            Action::SingleFlow(f) => (1, f.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSet {
    /// Sorted, duplicate free.
    pub flow_ids: Vec<FlowId>,
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSetSystem {
    universe: Vec<FlowId>,
    sets: Vec<CandidateSet>,
    weights: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverSolution {
    /// Indices into [`WeightedSetSystem::sets`], ascending.
    pub chosen: Vec<usize>,
    pub total_weight: u64,
}

/// Outcome of [`exact_cover`]. `proven` is false when the node budget ran out
/// before the search finished; the solution is then the best one found.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactCover {
    pub solution: CoverSolution,
    pub proven: bool,
    pub nodes: u64,
}

impl WeightedSetSystem {
    /// Builds a system from hand-made candidate sets, weighting each with
    /// `model`. The universe is taken from `universe`; the sets must stay inside
    /// it and jointly cover it.
    pub fn new(
        universe: impl IntoIterator<Item = FlowId>,
        sets: Vec<CandidateSet>,
        model: &CostModel,
    ) -> Result<Self, OptimizeError> {
        let universe: Vec<FlowId> = universe.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let mut sets = sets;
        for s in &mut sets {
            s.flow_ids.sort_unstable();
            s.flow_ids.dedup();
        }
        let weights = sets
            .iter()
            .map(|s| model.query_cost(s.flow_ids.len() as u64))
            .collect();
        let system = WeightedSetSystem {
            universe,
            sets,
            weights,
        };
        system.check_shape()?;
        Ok(system)
    }

    fn check_shape(&self) -> Result<(), OptimizeError> {
        let mut covered = vec![false; self.universe.len()];
        for (i, s) in self.sets.iter().enumerate() {
            if let Action::SingleFlow(f) = s.action {
                if s.flow_ids != [f] {
                    return Err(OptimizeError::BadSingleton(i));
                }
            }
            for &f in &s.flow_ids {
                let pos = self
                    .position(f)
                    .ok_or(OptimizeError::OutsideUniverse { set: i, flow: f })?;
                covered[pos] = true;
            }
        }
        if let Some(pos) = covered.iter().position(|c| !c) {
            return Err(OptimizeError::Uncoverable(self.universe[pos]));
        }
        Ok(())
    }

    pub fn universe(&self) -> &[FlowId] {
        &self.universe
    }

    pub fn sets(&self) -> &[CandidateSet] {
        &self.sets
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    /// Largest candidate set cardinality.
    pub fn max_set_size(&self) -> usize {
        self.sets.iter().map(|s| s.flow_ids.len()).max().unwrap_or(0)
    }

    fn position(&self, f: FlowId) -> Option<usize> {
        self.universe.binary_search(&f).ok()
    }

    /// Recomputes every invariant against the inputs the system claims to
    /// have been built from.
    pub fn audit(&self, topo: &Topology, flows: &[Flow], model: &CostModel) -> Result<(), OptimizeError> {
        self.check_shape()?;
        for (i, (s, &w)) in self.sets.iter().zip(&self.weights).enumerate() {
            let expected = model.query_cost(s.flow_ids.len() as u64);
            if w != expected {
                return Err(OptimizeError::WeightMismatch { set: i, expected, found: w });
            }
        }
        let mut through: BTreeMap<SwitchId, Vec<FlowId>> = BTreeMap::new();
        for f in flows {
            for &v in &f.path {
                through.entry(v).or_default().push(f.id);
            }
        }
        for list in through.values_mut() {
            list.sort_unstable();
        }
        let mut seen_poll = BTreeSet::new();
        let mut singles = BTreeSet::new();
        for s in &self.sets {
            match s.action {
                Action::PollAll(v) => {
                    if !topo.contains(v) || through.get(&v) != Some(&s.flow_ids) || !seen_poll.insert(v) {
                        return Err(OptimizeError::PollAllMismatch(v));
                    }
                }
                Action::SingleFlow(f) => {
                    singles.insert(f);
                }
            }
        }
        if let Some((&v, _)) = through.iter().find(|(v, _)| !seen_poll.contains(*v)) {
            return Err(OptimizeError::PollAllMismatch(v));
        }
        for f in flows {
            if !singles.contains(&f.id) {
                return Err(OptimizeError::MissingSingleton(f.id));
            }
        }
        Ok(())
    }

    /// Checks that `solution` covers the universe and that its total is right.
    pub fn verify(&self, solution: &CoverSolution) -> Result<(), OptimizeError> {
        let mut covered = vec![false; self.universe.len()];
        let mut total = 0;
        for &i in &solution.chosen {
            let s = self.sets.get(i).ok_or(OptimizeError::UnknownSet(i))?;
            total += self.weights[i];
            for &f in &s.flow_ids {
                if let Some(p) = self.position(f) {
                    covered[p] = true;
                }
            }
        }
        if let Some(p) = covered.iter().position(|c| !c) {
            return Err(OptimizeError::IncompleteCover(self.universe[p]));
        }
        if total != solution.total_weight {
            return Err(OptimizeError::WrongTotal {
                claimed: solution.total_weight,
                actual: total,
            });
        }
        Ok(())
    }

    /// Flat incidence lists: for each universe position, the sets holding it.
    fn incidence(&self) -> Vec<Vec<usize>> {
        let mut member_of = vec![Vec::new(); self.universe.len()];
        for (i, s) in self.sets.iter().enumerate() {
            for &f in &s.flow_ids {
                member_of[self.position(f).expect("checked by construction")].push(i);
            }
        }
        member_of
    }

    fn dense_sets(&self) -> Vec<Vec<usize>> {
        self.sets
            .iter()
            .map(|s| {
                s.flow_ids
                    .iter()
                    .map(|&f| self.position(f).expect("checked by construction"))
                    .collect()
            })
            .collect()
    }
}

/// Builds one poll-all set per switch that carries flows, plus one singleton
/// per flow. Sets come out poll-all first (by switch id), then singletons (by
/// flow id).
pub fn construct_weighted_sets(
    topo: &Topology,
    flows: &[Flow],
    model: &CostModel,
) -> Result<WeightedSetSystem, OptimizeError> {
    let mut ordered: Vec<&Flow> = flows.iter().collect();
    ordered.sort_unstable_by_key(|f| f.id);
    let mut through: Vec<Vec<FlowId>> = vec![Vec::new(); topo.switch_count()];
    for pair in ordered.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(ModelError::DuplicateFlow(pair[0].id).into());
        }
    }
    for f in &ordered {
        if f.path.is_empty() {
            return Err(ModelError::EmptyPath(f.id).into());
        }
        for &v in &f.path {
            through
                .get_mut(v.index())
                .ok_or(ModelError::UnknownSwitch {
                    switch: v,
                    n: topo.switch_count(),
                })?
                .push(f.id);
        }
    }

    let mut sets = Vec::with_capacity(topo.switch_count() + ordered.len());
    for (v, ids) in through.into_iter().enumerate() {
        if !ids.is_empty() {
            sets.push(CandidateSet {
                flow_ids: ids,
                action: Action::PollAll(SwitchId(v as u32)),
            });
        }
    }
    for f in &ordered {
        sets.push(CandidateSet {
            flow_ids: vec![f.id],
            action: Action::SingleFlow(f.id),
        });
    }
    let weights = sets
        .iter()
        .map(|s| model.query_cost(s.flow_ids.len() as u64))
        .collect();
    Ok(WeightedSetSystem {
        universe: ordered.iter().map(|f| f.id).collect(),
        sets,
        weights,
    })
}

/// Heap entry for the greedy rule. "Greater" means more cost-effective.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pick {
    weight: u64,
    uncovered: u64,
    cardinality: usize,
    rank: (u8, u32),
    set: usize,
}

impl Ord for Pick {
    fn cmp(&self, other: &Self) -> Ordering {
        // weight / uncovered, compared without division
        let lhs = u128::from(self.weight) * u128::from(other.uncovered);
        let rhs = u128::from(other.weight) * u128::from(self.uncovered);
        rhs.cmp(&lhs)
            .then_with(|| other.cardinality.cmp(&self.cardinality))
            .then_with(|| other.rank.cmp(&self.rank))
            .then_with(|| other.set.cmp(&self.set))
    }
}

impl PartialOrd for Pick {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy weighted set cover: repeatedly take the set with the lowest weight
/// per newly covered flow.
///
/// Ties go to the smaller set, then poll-all over single, then the lower
/// switch or flow id. A set's ratio only grows as coverage grows, so the heap
/// is re-scored lazily: an entry popped with a stale count is pushed back
/// with its current count, and a fresh entry at the top is a true minimum.
pub fn greedy_cover(system: &WeightedSetSystem) -> Result<CoverSolution, OptimizeError> {
    let dense = system.dense_sets();
    let member_of = system.incidence();
    let mut remaining: Vec<u64> = dense.iter().map(|s| s.len() as u64).collect();
    let mut covered = vec![false; system.universe.len()];
    let mut left = system.universe.len();

    let mut heap: BinaryHeap<Pick> = dense
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_empty())
        .map(|(i, s)| Pick {
            weight: system.weights[i],
            uncovered: s.len() as u64,
            cardinality: s.len(),
            rank: system.sets[i].action.rank(),
            set: i,
        })
        .collect();

    let mut chosen = Vec::new();
    let mut total = 0;
    while left > 0 {
        let Some(mut top) = heap.pop() else {
            let pos = covered.iter().position(|c| !c).expect("left > 0");
            return Err(OptimizeError::Uncoverable(system.universe[pos]));
        };
        let now = remaining[top.set];
        if now == 0 {
            continue;
        }
        if now != top.uncovered {
            top.uncovered = now;
            heap.push(top);
            continue;
        }
        chosen.push(top.set);
        total += top.weight;
        for &f in &dense[top.set] {
            if !covered[f] {
                covered[f] = true;
                left -= 1;
                for &t in &member_of[f] {
                    remaining[t] -= 1;
                }
            }
        }
    }
    chosen.sort_unstable();
    Ok(CoverSolution {
        chosen,
        total_weight: total,
    })
}

struct Search<'a> {
    weights: &'a [u64],
    dense: Vec<Vec<usize>>,
    /// Poll-all set indices in branching order.
    order: Vec<usize>,
    /// Position in `order` for each set, or usize::MAX for singletons.
    order_pos: Vec<usize>,
    member_of: Vec<Vec<usize>>,
    singleton: Vec<Option<usize>>,
    remaining: Vec<u64>,
    cover_count: Vec<u32>,
    uncovered: usize,
    included: Vec<usize>,
    best: u64,
    best_sets: Vec<usize>,
    nodes: u64,
    budget: u64,
    exhausted: bool,
}

impl Search<'_> {
    fn closure(&self) -> Option<(u64, Vec<usize>)> {
        let mut cost = 0;
        let mut sets = Vec::new();
        for (f, &c) in self.cover_count.iter().enumerate() {
            if c == 0 {
                let s = self.singleton[f]?;
                cost += self.weights[s];
                sets.push(s);
            }
        }
        Some((cost, sets))
    }

    /// Sum over uncovered flows of the cheapest per-flow price among the sets
    /// still available: singletons and undecided poll-all sets from `pos` on.
    /// Any completion pays at least this much.
    fn lower_bound(&self, pos: usize) -> f64 {
        let mut lb = 0.0;
        for (f, &c) in self.cover_count.iter().enumerate() {
            if c > 0 {
                continue;
            }
            let mut price = f64::INFINITY;
            for &t in &self.member_of[f] {
                let p = self.order_pos[t];
                if p == usize::MAX || p >= pos {
                    let share = self.weights[t] as f64 / self.remaining[t] as f64;
                    price = price.min(share);
                }
            }
            lb += price;
        }
        lb
    }

    fn include(&mut self, set: usize) {
        self.included.push(set);
        for i in 0..self.dense[set].len() {
            let f = self.dense[set][i];
            self.cover_count[f] += 1;
            if self.cover_count[f] == 1 {
                self.uncovered -= 1;
                for &t in &self.member_of[f] {
                    self.remaining[t] -= 1;
                }
            }
        }
    }

    fn exclude_undo(&mut self, set: usize) {
        self.included.pop();
        for i in 0..self.dense[set].len() {
            let f = self.dense[set][i];
            self.cover_count[f] -= 1;
            if self.cover_count[f] == 0 {
                self.uncovered += 1;
                for &t in &self.member_of[f] {
                    self.remaining[t] += 1;
                }
            }
        }
    }

    fn dfs(&mut self, mut pos: usize, partial: u64) {
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return;
        }
        if let Some((close, singles)) = self.closure() {
            if partial + close < self.best {
                self.best = partial + close;
                self.best_sets = self.included.iter().copied().chain(singles).collect();
            }
        }
        if self.uncovered == 0 {
            return;
        }
        // Weights are integers, so only a completion of at most best - 1 helps.
        if partial as f64 + self.lower_bound(pos) > (self.best - 1) as f64 + 1e-6 {
            return;
        }
        while pos < self.order.len() && self.remaining[self.order[pos]] == 0 {
            pos += 1;
        }
        if pos == self.order.len() {
            return;
        }
        let set = self.order[pos];
        self.include(set);
        self.dfs(pos + 1, partial + self.weights[set]);
        self.exclude_undo(set);
        if self.exhausted {
            return;
        }
        self.dfs(pos + 1, partial);
    }
}

/// Minimum-weight cover by branch and bound over the poll-all sets.
///
/// Once the poll-all choice is fixed the best completion is forced: every
/// flow left uncovered needs its own singleton. The search branches
/// include/exclude on poll-all sets (largest first), evaluates that forced
/// completion at every node, and prunes with a per-flow price bound. The
/// greedy cover seeds the incumbent. Intended for instances with a few dozen
/// poll-all sets.
pub fn exact_cover(system: &WeightedSetSystem, budget: u64) -> Result<ExactCover, OptimizeError> {
    let seed = greedy_cover(system)?;
    let dense = system.dense_sets();
    let member_of = system.incidence();
    let mut singleton = vec![None; system.universe.len()];
    let mut order = Vec::new();
    for (i, s) in system.sets.iter().enumerate() {
        match s.action {
            Action::SingleFlow(_) => {
                let f = dense[i][0];
                // keep the cheapest singleton if a hand-built system has several
                if singleton[f].is_none_or(|j: usize| system.weights[i] < system.weights[j]) {
                    singleton[f] = Some(i);
                }
            }
            Action::PollAll(_) => order.push(i),
        }
    }
    order.sort_by(|&a, &b| dense[b].len().cmp(&dense[a].len()).then(a.cmp(&b)));
    let mut order_pos = vec![usize::MAX; system.sets.len()];
    for (p, &s) in order.iter().enumerate() {
        order_pos[s] = p;
    }
    let remaining = dense.iter().map(|s| s.len() as u64).collect();
    let mut search = Search {
        weights: &system.weights,
        cover_count: vec![0; system.universe.len()],
        uncovered: system.universe.len(),
        dense,
        order,
        order_pos,
        member_of,
        singleton,
        remaining,
        included: Vec::new(),
        best: seed.total_weight,
        best_sets: seed.chosen.clone(),
        nodes: 0,
        budget,
        exhausted: false,
    };
    if search.uncovered > 0 {
        search.dfs(0, 0);
    }
    let mut chosen = search.best_sets;
    chosen.sort_unstable();
    Ok(ExactCover {
        solution: CoverSolution {
            chosen,
            total_weight: search.best,
        },
        proven: !search.exhausted,
        nodes: search.nodes,
    })
}

/// Turns chosen sets into controller actions. Singletons become single polls
/// at the flow's last switch, unless a chosen poll-all switch already sees
/// the flow.
pub fn decode_scheme(
    system: &WeightedSetSystem,
    solution: &CoverSolution,
    flows: &[Flow],
) -> Result<PollingScheme, OptimizeError> {
    let by_id: BTreeMap<FlowId, &Flow> = flows.iter().map(|f| (f.id, f)).collect();
    let mut scheme = PollingScheme::new();
    let mut singles = Vec::new();
    for &i in &solution.chosen {
        match system.sets.get(i).ok_or(OptimizeError::UnknownSet(i))?.action {
            Action::PollAll(v) => {
                scheme.poll_all.insert(v);
            }
            Action::SingleFlow(f) => singles.push(f),
        }
    }
    for f in singles {
        let flow = by_id.get(&f).ok_or(OptimizeError::UnknownFlow(f))?;
        if !flow.path.iter().any(|v| scheme.poll_all.contains(v)) {
            scheme.single_polls.insert(f, flow.last_switch());
        }
    }
    Ok(scheme)
}

/// Construct, solve greedily and decode in one call.
pub fn greedy_scheme(
    topo: &Topology,
    flows: &[Flow],
    model: &CostModel,
) -> Result<PollingScheme, OptimizeError> {
    let system = construct_weighted_sets(topo, flows, model)?;
    let solution = greedy_cover(&system)?;
    decode_scheme(&system, &solution, flows)
}

pub fn write_solution(system: &WeightedSetSystem, solution: &CoverSolution, proven: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "solution weight={} proven={}", solution.total_weight, proven);
    for &i in &solution.chosen {
        match system.sets[i].action {
            Action::PollAll(v) => {
                let _ = writeln!(out, "pollall {v}");
            }
            Action::SingleFlow(f) => {
                let _ = writeln!(out, "single {f}");
            }
        }
    }
    out
}

/// Parses a solution written by [`write_solution`] back into set indices of
/// `system`, returning the solution and its `proven` flag.
pub fn parse_solution(system: &WeightedSetSystem, text: &str) -> Result<(CoverSolution, bool), FormatError> {
    let by_action: BTreeMap<Action, usize> = system
        .sets
        .iter()
        .enumerate()
        .map(|(i, s)| (s.action, i))
        .collect();
    let err = |line: usize, msg: String| FormatError::Syntax { line, msg };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| err(1, "empty solution".into()))?;
    let mut toks = header.split_whitespace();
    let (weight, proven) = match (toks.next(), toks.next(), toks.next(), toks.next()) {
        (Some("solution"), Some(w), Some(p), None) => {
            let w = w
                .strip_prefix("weight=")
                .and_then(|w| w.parse::<u64>().ok())
                .ok_or_else(|| err(hl, format!("bad weight `{w}`")))?;
            let p = p
                .strip_prefix("proven=")
                .and_then(|p| p.parse::<bool>().ok())
                .ok_or_else(|| err(hl, format!("bad proven flag `{p}`")))?;
            (w, p)
        }
        _ => return Err(err(hl, "expected `solution weight=<w> proven=<bool>`".into())),
    };
    let mut chosen = Vec::new();
    for (line, l) in lines {
        let mut toks = l.split_whitespace();
        let action = match (toks.next(), toks.next().map(str::parse::<u32>), toks.next()) {
            (Some("pollall"), Some(Ok(v)), None) => Action::PollAll(SwitchId(v)),
            (Some("single"), Some(Ok(f)), None) => Action::SingleFlow(FlowId(f)),
            _ => return Err(err(line, format!("bad solution line `{l}`"))),
        };
        let idx = by_action
            .get(&action)
            .ok_or_else(|| err(line, format!("no candidate set for `{l}`")))?;
        chosen.push(*idx);
    }
    chosen.sort_unstable();
    Ok((
        CoverSolution {
            chosen,
            total_weight: weight,
        },
        proven,
    ))
}
