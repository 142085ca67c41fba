//! Keeping a polling scheme valid while flows arrive and expire.
//!
//! Between periodic recomputations the scheme is only patched: an arriving
//! flow that no polled switch sees gets a single poll, and an expiring flow
//! drops its single poll if it had one. Poll-all switches are left alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::format::{parse_flow_line, write_flow_fields, FormatError};
use crate::model::{covers, scheme_cost, CostModel, Flow, FlowId, FlowsAt, ModelError, PollingScheme, Topology};
use crate::optimizer::{greedy_scheme, OptimizeError};

#[derive(Debug, Error, PartialEq)]
pub enum ChurnError {
    #[error("flow {0} is already active")]
    DuplicateFlow(FlowId),
    #[error("flow {0} is not active")]
    UnknownFlow(FlowId),
    #[error("flow {0} is not covered by the scheme")]
    Uncovered(FlowId),
    #[error("single poll refers to inactive flow {0}")]
    StaleSinglePoll(FlowId),
    #[error("recompute interval must be at least one round")]
    ZeroInterval,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChurnState {
    scheme: PollingScheme,
    active_flows: BTreeMap<FlowId, Flow>,
    polls_since_recompute: u64,
    recompute_interval: u64,
}

impl ChurnState {
    /// Wraps an existing scheme. Every flow must be covered and every single
    /// poll must belong to one of `flows`.
    pub fn new(scheme: PollingScheme, flows: Vec<Flow>, recompute_interval: u64) -> Result<Self, ChurnError> {
        if recompute_interval == 0 {
            return Err(ChurnError::ZeroInterval);
        }
        let mut active = BTreeMap::new();
        for f in flows {
            if !covers(&scheme, &f) {
                return Err(ChurnError::Uncovered(f.id));
            }
            let id = f.id;
            if active.insert(id, f).is_some() {
                return Err(ChurnError::DuplicateFlow(id));
            }
        }
        for (fid, &s) in &scheme.single_polls {
            let f = active.get(fid).ok_or(ChurnError::StaleSinglePoll(*fid))?;
            if !f.path.contains(&s) {
                return Err(ModelError::SwitchOffPath { flow: *fid, switch: s }.into());
            }
        }
        Ok(ChurnState {
            scheme,
            active_flows: active,
            polls_since_recompute: 0,
            recompute_interval,
        })
    }

    /// Starts from a fresh greedy scheme over `flows`.
    pub fn fresh(
        topo: &Topology,
        flows: Vec<Flow>,
        model: &CostModel,
        recompute_interval: u64,
    ) -> Result<Self, ChurnError> {
        let scheme = greedy_scheme(topo, &flows, model)?;
        Self::new(scheme, flows, recompute_interval)
    }

    pub fn scheme(&self) -> &PollingScheme {
        &self.scheme
    }

    pub fn active_flows(&self) -> &BTreeMap<FlowId, Flow> {
        &self.active_flows
    }

    pub fn polls_since_recompute(&self) -> u64 {
        self.polls_since_recompute
    }

    pub fn recompute_interval(&self) -> u64 {
        self.recompute_interval
    }

    /// Overrides the round counter, e.g. to resume from a saved position.
    pub fn with_counter(mut self, polls_since_recompute: u64) -> Self {
        self.polls_since_recompute = polls_since_recompute % self.recompute_interval;
        self
    }

    pub fn on_flow_arrival(&mut self, flow: Flow) -> Result<(), ChurnError> {
        if self.active_flows.contains_key(&flow.id) {
            return Err(ChurnError::DuplicateFlow(flow.id));
        }
        if flow.path.is_empty() {
            return Err(ModelError::EmptyPath(flow.id).into());
        }
        if !covers(&self.scheme, &flow) {
            self.scheme.single_polls.insert(flow.id, flow.last_switch());
        }
        self.active_flows.insert(flow.id, flow);
        Ok(())
    }

    pub fn on_flow_expiry(&mut self, id: FlowId) -> Result<Flow, ChurnError> {
        let flow = self.active_flows.remove(&id).ok_or(ChurnError::UnknownFlow(id))?;
        self.scheme.single_polls.remove(&id);
        Ok(flow)
    }

    /// Counts one polling round and recomputes the scheme from scratch once
    /// `recompute_interval` rounds have passed. Returns whether it recomputed.
    pub fn maybe_recompute(&mut self, topo: &Topology, model: &CostModel) -> Result<bool, ChurnError> {
        self.polls_since_recompute += 1;
        if self.polls_since_recompute < self.recompute_interval {
            return Ok(false);
        }
        let flows: Vec<Flow> = self.active_flows.values().cloned().collect();
        self.scheme = greedy_scheme(topo, &flows, model)?;
        self.polls_since_recompute = 0;
        Ok(true)
    }

    /// Bytes for one collection round with the current scheme and flows.
    pub fn cost(&self, model: &CostModel, switch_count: usize) -> Result<u64, ChurnError> {
        let at = FlowsAt::from_flows(switch_count, self.active_flows.values());
        Ok(scheme_cost(model, &self.scheme, &at)?)
    }

    /// True iff every active flow is covered and no single poll is stale.
    pub fn is_consistent(&self) -> bool {
        self.active_flows.values().all(|f| covers(&self.scheme, f))
            && self
                .scheme
                .single_polls
                .keys()
                .all(|f| self.active_flows.contains_key(f))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ChurnEventKind {
    Arrive(Flow),
    Expire(FlowId),
}

/// One line of a churn trace.
#[derive(Clone, Debug, PartialEq)]
pub struct ChurnEvent {
    pub round: u64,
    pub kind: ChurnEventKind,
}

/// Trace lines look like `t=<round> arrive id=.. path=.. vol=.. pkt=..` or
/// `t=<round> expire id=..`. Rounds must not decrease.
pub fn write_trace(events: &[ChurnEvent]) -> String {
    let mut out = String::new();
    for e in events {
        match &e.kind {
            ChurnEventKind::Arrive(f) => {
                let _ = write!(out, "t={} arrive ", e.round);
                write_flow_fields(&mut out, f);
                out.push('\n');
            }
            ChurnEventKind::Expire(id) => {
                let _ = writeln!(out, "t={} expire id={}", e.round, id);
            }
        }
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Vec<ChurnEvent>, FormatError> {
    let mut events = Vec::new();
    let mut last_round = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| FormatError::Syntax {
            line,
            msg: msg.to_string(),
        };
        let (t, rest) = l.split_once(char::is_whitespace).ok_or_else(|| bad("truncated event"))?;
        let round: u64 = t
            .strip_prefix("t=")
            .and_then(|r| r.parse().ok())
            .ok_or_else(|| bad("expected `t=<round>`"))?;
        if round < last_round {
            return Err(bad("rounds must not decrease"));
        }
        last_round = round;
        let rest = rest.trim_start();
        let kind = if let Some(fields) = rest.strip_prefix("arrive ") {
            ChurnEventKind::Arrive(parse_flow_line(line, fields)?)
        } else if let Some(fields) = rest.strip_prefix("expire ") {
            let id = fields
                .trim()
                .strip_prefix("id=")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("expected `expire id=<flow>`"))?;
            ChurnEventKind::Expire(FlowId(id))
        } else {
            return Err(bad("expected `arrive` or `expire`"));
        };
        events.push(ChurnEvent { round, kind });
    }
    Ok(events)
}

/// Cost of one replayed polling round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayRound {
    pub round: u64,
    pub active_flows: usize,
    pub cost: u64,
    pub recomputed: bool,
}

/// Replays `events` against `state`. After the events of each round (and for
/// every empty round in between) one polling round is counted via
/// [`ChurnState::maybe_recompute`] and its cost recorded.
pub fn replay(
    state: &mut ChurnState,
    events: &[ChurnEvent],
    topo: &Topology,
    model: &CostModel,
) -> Result<Vec<ReplayRound>, ChurnError> {
    let mut out = Vec::new();
    let Some(last) = events.last().map(|e| e.round) else {
        return Ok(out);
    };
    let mut idx = 0;
    for round in events[0].round..=last {
        while idx < events.len() && events[idx].round == round {
            match &events[idx].kind {
                ChurnEventKind::Arrive(f) => state.on_flow_arrival(f.clone())?,
                ChurnEventKind::Expire(id) => {
                    state.on_flow_expiry(*id)?;
                }
            }
            idx += 1;
        }
        let recomputed = state.maybe_recompute(topo, model)?;
        out.push(ReplayRound {
            round,
            active_flows: state.active_flows.len(),
            cost: state.cost(model, topo.switch_count())?,
            recomputed,
        });
    }
    Ok(out)
}
