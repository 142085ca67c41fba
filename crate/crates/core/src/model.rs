//! Domain types shared by every stage of the pipeline: the switch graph,
//! active flows, the OpenFlow 1.0 statistics message cost model and the
//! decoded polling scheme.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a switch in a [`Topology`], `0..n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SwitchId(pub u32);

/// Identity of an active flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowId(pub u32);

impl SwitchId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for SwitchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("link ({0}, {1}) is a self loop")]
    SelfLoop(SwitchId, SwitchId),
    #[error("switch {switch} is out of range for a topology of {n} switches")]
    UnknownSwitch { switch: SwitchId, n: usize },
    #[error("topology is not connected")]
    Disconnected,
    #[error("topology needs at least one switch")]
    Empty,
    #[error("flow {0} has an empty path")]
    EmptyPath(FlowId),
    #[error("flow {flow}: switches {from} and {to} are not adjacent")]
    NotAdjacent { flow: FlowId, from: SwitchId, to: SwitchId },
    #[error("flow {flow} visits switch {switch} twice")]
    RepeatedSwitch { flow: FlowId, switch: SwitchId },
    #[error("flow {0}: packet size must be positive")]
    ZeroPacketSize(FlowId),
    #[error("flow {flow}: volume {volume} is not a whole number of {packet}-byte packets")]
    PartialPacket { flow: FlowId, volume: u64, packet: u32 },
    #[error("duplicate flow id {0}")]
    DuplicateFlow(FlowId),
    #[error("single poll for flow {flow} names switch {switch}, which is not on its path")]
    SwitchOffPath { flow: FlowId, switch: SwitchId },
    #[error("cost model constants must be strictly positive")]
    NonPositiveCost,
}

/// Undirected switch graph with loss annotations.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    n: usize,
    links: BTreeSet<(SwitchId, SwitchId)>,
    loss_switches: BTreeSet<SwitchId>,
    coordinates: Option<Vec<(f64, f64)>>,
    adjacency: Vec<Vec<SwitchId>>,
}

impl Topology {
    /// Builds a topology and verifies every invariant, including connectivity.
    pub fn new(
        n: usize,
        links: impl IntoIterator<Item = (SwitchId, SwitchId)>,
    ) -> Result<Self, ModelError> {
        let topo = Self::new_unchecked_connectivity(n, links)?;
        if !topo.is_connected() {
            return Err(ModelError::Disconnected);
        }
        Ok(topo)
    }

    /// Same as [`Topology::new`] but accepts disconnected graphs. Generators use
    /// this for candidate graphs before their connectivity retry loop.
    pub(crate) fn new_unchecked_connectivity(
        n: usize,
        links: impl IntoIterator<Item = (SwitchId, SwitchId)>,
    ) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::Empty);
        }
        let mut set = BTreeSet::new();
        for (u, v) in links {
            if u == v {
                return Err(ModelError::SelfLoop(u, v));
            }
            for s in [u, v] {
                if s.index() >= n {
                    return Err(ModelError::UnknownSwitch { switch: s, n });
                }
            }
            set.insert((u.min(v), u.max(v)));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &set {
            adjacency[u.index()].push(v);
            adjacency[v.index()].push(u);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(Topology {
            n,
            links: set,
            loss_switches: BTreeSet::new(),
            coordinates: None,
            adjacency,
        })
    }

    pub fn with_loss_switches(
        mut self,
        loss: impl IntoIterator<Item = SwitchId>,
    ) -> Result<Self, ModelError> {
        let loss: BTreeSet<SwitchId> = loss.into_iter().collect();
        if let Some(&s) = loss.iter().find(|s| s.index() >= self.n) {
            return Err(ModelError::UnknownSwitch { switch: s, n: self.n });
        }
        self.loss_switches = loss;
        Ok(self)
    }

    pub fn with_coordinates(mut self, coords: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        if coords.len() != self.n {
            return Err(ModelError::UnknownSwitch {
                switch: SwitchId(coords.len() as u32),
                n: self.n,
            });
        }
        self.coordinates = Some(coords);
        Ok(self)
    }

    pub fn switch_count(&self) -> usize {
        self.n
    }

    pub fn switches(&self) -> impl Iterator<Item = SwitchId> {
        (0..self.n as u32).map(SwitchId)
    }

    pub fn links(&self) -> &BTreeSet<(SwitchId, SwitchId)> {
        &self.links
    }

    pub fn loss_switches(&self) -> &BTreeSet<SwitchId> {
        &self.loss_switches
    }

    pub fn is_loss_switch(&self, s: SwitchId) -> bool {
        self.loss_switches.contains(&s)
    }

    pub fn coordinates(&self) -> Option<&[(f64, f64)]> {
        self.coordinates.as_deref()
    }

    /// Neighbors of `s` in ascending id order.
    pub fn neighbors(&self, s: SwitchId) -> &[SwitchId] {
        &self.adjacency[s.index()]
    }

    pub fn contains(&self, s: SwitchId) -> bool {
        s.index() < self.n
    }

    pub fn are_adjacent(&self, u: SwitchId, v: SwitchId) -> bool {
        self.links.contains(&(u.min(v), u.max(v)))
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for v in &self.adjacency[u] {
                if !seen[v.index()] {
                    seen[v.index()] = true;
                    reached += 1;
                    queue.push_back(v.index());
                }
            }
        }
        reached == self.n
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.links.len() as f64 / self.n as f64
    }
}

/// An active flow routed along a simple switch path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    pub id: FlowId,
    pub path: Vec<SwitchId>,
    pub volume_bytes: u64,
    pub packet_size_bytes: u32,
}

impl Flow {
    pub fn first_switch(&self) -> SwitchId {
        self.path[0]
    }

    pub fn last_switch(&self) -> SwitchId {
        self.path[self.path.len() - 1]
    }

    pub fn packets(&self) -> u64 {
        self.volume_bytes / u64::from(self.packet_size_bytes)
    }

    /// Checks the path and volume invariants against `topo`.
    pub fn validate(&self, topo: &Topology) -> Result<(), ModelError> {
        if self.path.is_empty() {
            return Err(ModelError::EmptyPath(self.id));
        }
        if self.packet_size_bytes == 0 {
            return Err(ModelError::ZeroPacketSize(self.id));
        }
        if !self.volume_bytes.is_multiple_of(u64::from(self.packet_size_bytes)) {
            return Err(ModelError::PartialPacket {
                flow: self.id,
                volume: self.volume_bytes,
                packet: self.packet_size_bytes,
            });
        }
        let mut seen = BTreeSet::new();
        for &s in &self.path {
            if !topo.contains(s) {
                return Err(ModelError::UnknownSwitch {
                    switch: s,
                    n: topo.switch_count(),
                });
            }
            if !seen.insert(s) {
                return Err(ModelError::RepeatedSwitch { flow: self.id, switch: s });
            }
        }
        for pair in self.path.windows(2) {
            if !topo.are_adjacent(pair[0], pair[1]) {
                return Err(ModelError::NotAdjacent {
                    flow: self.id,
                    from: pair[0],
                    to: pair[1],
                });
            }
        }
        Ok(())
    }
}

/// Validates a whole flow set: per-flow invariants plus unique ids.
pub fn validate_flows(topo: &Topology, flows: &[Flow]) -> Result<(), ModelError> {
    let mut ids = BTreeSet::new();
    for f in flows {
        if !ids.insert(f.id) {
            return Err(ModelError::DuplicateFlow(f.id));
        }
        f.validate(topo)?;
    }
    Ok(())
}

/// On-wire lengths of OpenFlow 1.0 flow statistics messages, in bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub l_req: u64,
    pub l_reply_header: u64,
    pub l_single_flow_entry: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            l_req: 122,
            l_reply_header: 78,
            l_single_flow_entry: 96,
        }
    }
}

impl CostModel {
    pub fn new(l_req: u64, l_reply_header: u64, l_single_flow_entry: u64) -> Result<Self, ModelError> {
        if l_req == 0 || l_reply_header == 0 || l_single_flow_entry == 0 {
            return Err(ModelError::NonPositiveCost);
        }
        Ok(CostModel {
            l_req,
            l_reply_header,
            l_single_flow_entry,
        })
    }

    /// Length of a statistics reply carrying `n_entries` flow entries.
    pub fn reply_length(&self, n_entries: u64) -> u64 {
        self.l_reply_header + n_entries * self.l_single_flow_entry
    }

    /// Request plus reply for one query returning `n_entries` entries.
    pub fn query_cost(&self, n_entries: u64) -> u64 {
        self.l_req + self.reply_length(n_entries)
    }

    /// Cost of polling every flow individually.
    pub fn per_flow_baseline_cost(&self, flow_count: u64) -> u64 {
        flow_count * self.query_cost(1)
    }
}

/// Flow ids seen at each switch, indexed by switch id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowsAt {
    per_switch: Vec<BTreeSet<FlowId>>,
}

impl FlowsAt {
    pub fn new(switch_count: usize) -> Self {
        FlowsAt {
            per_switch: vec![BTreeSet::new(); switch_count],
        }
    }

    /// Indexes `flows` by switch. Paths must already be valid for `switch_count`.
    pub fn from_flows<'a>(switch_count: usize, flows: impl IntoIterator<Item = &'a Flow>) -> Self {
        let mut at = Self::new(switch_count);
        for f in flows {
            at.insert(f);
        }
        at
    }

    pub fn insert(&mut self, flow: &Flow) {
        for s in &flow.path {
            self.per_switch[s.index()].insert(flow.id);
        }
    }

    pub fn remove(&mut self, flow: &Flow) {
        for s in &flow.path {
            self.per_switch[s.index()].remove(&flow.id);
        }
    }

    pub fn switch_count(&self) -> usize {
        self.per_switch.len()
    }

    pub fn get(&self, s: SwitchId) -> Option<&BTreeSet<FlowId>> {
        self.per_switch.get(s.index())
    }

    pub fn count(&self, s: SwitchId) -> Option<usize> {
        self.get(s).map(BTreeSet::len)
    }
}

/// Decoded polling decision: switches polled with a wildcard request and
/// flows polled individually from one switch each.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PollingScheme {
    pub poll_all: BTreeSet<SwitchId>,
    pub single_polls: BTreeMap<FlowId, SwitchId>,
}

impl PollingScheme {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a single poll after checking the switch lies on the flow's path.
    /// Replaces any earlier single poll for the same flow.
    pub fn add_single_poll(&mut self, flow: &Flow, switch: SwitchId) -> Result<(), ModelError> {
        if !flow.path.contains(&switch) {
            return Err(ModelError::SwitchOffPath { flow: flow.id, switch });
        }
        self.single_polls.insert(flow.id, switch);
        Ok(())
    }

    /// Every single poll must sit on its flow's path.
    pub fn validate(&self, flows: &BTreeMap<FlowId, &Flow>) -> Result<(), ModelError> {
        for (&fid, &s) in &self.single_polls {
            match flows.get(&fid) {
                Some(f) if f.path.contains(&s) => {}
                _ => return Err(ModelError::SwitchOffPath { flow: fid, switch: s }),
            }
        }
        Ok(())
    }
}

/// Bytes on the wire for one collection round of `scheme`.
pub fn scheme_cost(
    model: &CostModel,
    scheme: &PollingScheme,
    flows_at: &FlowsAt,
) -> Result<u64, ModelError> {
    let mut total = 0;
    for &s in &scheme.poll_all {
        let count = flows_at.count(s).ok_or(ModelError::UnknownSwitch {
            switch: s,
            n: flows_at.switch_count(),
        })?;
        total += model.query_cost(count as u64);
    }
    total += scheme.single_polls.len() as u64 * model.query_cost(1);
    Ok(total)
}

pub fn per_flow_baseline_cost(model: &CostModel, flow_count: u64) -> u64 {
    model.per_flow_baseline_cost(flow_count)
}

/// True iff the scheme collects `flow`'s statistics somewhere.
pub fn covers(scheme: &PollingScheme, flow: &Flow) -> bool {
    scheme.single_polls.contains_key(&flow.id)
        || flow.path.iter().any(|s| scheme.poll_all.contains(s))
}
