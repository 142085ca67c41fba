//! Seeded generators for topologies, flows and packet loss, and the counter
//! simulation that produces what each switch would report for each flow.
//!
//! Every generator owns a ChaCha8 stream seeded from its [`RngSeed`], so the
//! same seed and parameters give the same objects on every platform.
//! Transcendental functions go through `libm` for the same reason.

use std::collections::{BTreeMap, VecDeque};

use rand::distributions::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Flow, FlowId, ModelError, SwitchId, Topology};

pub const DEFAULT_PACKET_SIZE: u32 = 1500;
pub const DEFAULT_VOLUME_RANGE: (u64, u64) = (15_000, 15_000_000);
pub const WAXMAN_ALPHA: f64 = 0.15;
pub const WAXMAN_BETA: f64 = 0.2;
/// Generators give up after this many disconnected candidates.
pub const MAX_ATTEMPTS: u32 = 100;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no connected graph after {0} attempts")]
    NotConnected(u32),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent child seed for a named sub-stream (splitmix64 finalizer).
    pub fn derive(self, stream: u64) -> RngSeed {
        let mut z = self.0 ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

/// Edge probability used when none is given: twice the connectivity threshold.
pub fn default_er_probability(n: usize) -> f64 {
    2.0 * libm::log(n as f64) / n as f64
}

pub fn gen_erdos_renyi(n: usize, p: f64, seed: RngSeed) -> Result<Topology, SimError> {
    if n < 2 {
        return Err(SimError::InvalidParameter(format!("need at least 2 switches, got {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(SimError::InvalidParameter(format!("edge probability {p} not in (0, 1]")));
    }
    let mut rng = seed.rng();
    let coin = Bernoulli::new(p).expect("checked range");
    for _ in 0..MAX_ATTEMPTS {
        let mut links = Vec::new();
        for u in 0..n as u32 {
            for v in u + 1..n as u32 {
                if coin.sample(&mut rng) {
                    links.push((SwitchId(u), SwitchId(v)));
                }
            }
        }
        let topo = Topology::new_unchecked_connectivity(n, links)?;
        if topo.is_connected() {
            return Ok(topo);
        }
    }
    Err(SimError::NotConnected(MAX_ATTEMPTS))
}

/// Waxman graph: switches uniform in the unit square, each pair linked with
/// probability `alpha * exp(-d / (beta * L))`, `L` the largest pairwise
/// distance. Disconnected candidates are redrawn, positions included.
pub fn gen_waxman(n: usize, alpha: f64, beta: f64, seed: RngSeed) -> Result<Topology, SimError> {
    if n < 2 {
        return Err(SimError::InvalidParameter(format!("need at least 2 switches, got {n}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) || !(beta > 0.0 && beta <= 1.0) {
        return Err(SimError::InvalidParameter(format!(
            "alpha {alpha} and beta {beta} must lie in (0, 1]"
        )));
    }
    let mut rng = seed.rng();
    for _ in 0..MAX_ATTEMPTS {
        let coords: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
        let dist = |a: usize, b: usize| {
            let (dx, dy) = (coords[a].0 - coords[b].0, coords[a].1 - coords[b].1);
            (dx * dx + dy * dy).sqrt()
        };
        let mut max_d: f64 = 0.0;
        for u in 0..n {
            for v in u + 1..n {
                max_d = max_d.max(dist(u, v));
            }
        }
        let mut links = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let prob = if max_d > 0.0 {
                    alpha * libm::exp(-dist(u, v) / (beta * max_d))
                } else {
                    alpha
                };
                if rng.gen_bool(prob) {
                    links.push((SwitchId(u as u32), SwitchId(v as u32)));
                }
            }
        }
        let topo = Topology::new_unchecked_connectivity(n, links)?;
        if topo.is_connected() {
            return Ok(topo.with_coordinates(coords)?);
        }
    }
    Err(SimError::NotConnected(MAX_ATTEMPTS))
}

/// Breadth-first shortest paths. Neighbors are expanded in ascending id
/// order and a switch keeps the first predecessor that reaches it, so routes
/// are unique and reproducible. Trees are cached per source.
pub struct Router<'a> {
    topo: &'a Topology,
    parents: BTreeMap<SwitchId, Vec<Option<SwitchId>>>,
}

impl<'a> Router<'a> {
    pub fn new(topo: &'a Topology) -> Self {
        Router {
            topo,
            parents: BTreeMap::new(),
        }
    }

    fn tree(&mut self, src: SwitchId) -> &[Option<SwitchId>] {
        let topo = self.topo;
        self.parents.entry(src).or_insert_with(|| {
            let mut parent = vec![None; topo.switch_count()];
            let mut seen = vec![false; topo.switch_count()];
            seen[src.index()] = true;
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                for &v in topo.neighbors(u) {
                    if !seen[v.index()] {
                        seen[v.index()] = true;
                        parent[v.index()] = Some(u);
                        queue.push_back(v);
                    }
                }
            }
            parent
        })
    }

    /// Switch path from `src` to `dst`, both included. `None` if unreachable.
    pub fn route(&mut self, src: SwitchId, dst: SwitchId) -> Option<Vec<SwitchId>> {
        let tree = self.tree(src);
        let mut path = vec![dst];
        let mut at = dst;
        while at != src {
            at = tree[at.index()]?;
            path.push(at);
        }
        path.reverse();
        Some(path)
    }
}

/// Endless source of random flows over one topology, numbered from a start id.
pub struct FlowGenerator<'a> {
    router: Router<'a>,
    rng: ChaCha8Rng,
    next_id: u32,
    log_lo: f64,
    log_hi: f64,
    packet: u32,
}

impl<'a> FlowGenerator<'a> {
    pub fn new(topo: &'a Topology, volume_range: (u64, u64), seed: RngSeed) -> Result<Self, SimError> {
        let (lo, hi) = volume_range;
        if lo == 0 || lo > hi {
            return Err(SimError::InvalidParameter(format!("bad volume range {lo}..{hi}")));
        }
        if topo.switch_count() < 2 {
            return Err(SimError::InvalidParameter("flows need at least 2 switches".into()));
        }
        Ok(FlowGenerator {
            router: Router::new(topo),
            rng: seed.rng(),
            next_id: 0,
            log_lo: libm::log(lo as f64),
            log_hi: libm::log(hi as f64),
            packet: DEFAULT_PACKET_SIZE,
        })
    }

    pub fn starting_at(mut self, id: u32) -> Self {
        self.next_id = id;
        self
    }

    pub fn next_flow(&mut self) -> Flow {
        let n = self.router.topo.switch_count() as u32;
        let src = self.rng.gen_range(0..n);
        let mut dst = self.rng.gen_range(0..n - 1);
        if dst >= src {
            dst += 1;
        }
        let path = self
            .router
            .route(SwitchId(src), SwitchId(dst))
            .expect("topology is connected");
        let u: f64 = self.rng.gen();
        let raw = libm::exp(self.log_lo + u * (self.log_hi - self.log_lo));
        let packet = u64::from(self.packet);
        let volume = ((raw as u64) / packet).max(1) * packet;
        let id = FlowId(self.next_id);
        self.next_id += 1;
        Flow {
            id,
            path,
            volume_bytes: volume,
            packet_size_bytes: self.packet,
        }
    }
}

/// `m` flows with uniformly random distinct endpoints, shortest-path routes
/// and log-uniform volumes rounded down to whole 1500-byte packets.
pub fn gen_flows(
    topo: &Topology,
    m: usize,
    volume_range: (u64, u64),
    seed: RngSeed,
) -> Result<Vec<Flow>, SimError> {
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut generator = FlowGenerator::new(topo, volume_range, seed)?;
    Ok((0..m).map(|_| generator.next_flow()).collect())
}

/// Marks `round(ratio * n)` distinct switches, chosen uniformly, as lossy.
pub fn mark_loss_switches(topo: &Topology, ratio: f64, seed: RngSeed) -> Result<Topology, SimError> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(SimError::InvalidParameter(format!("loss switch ratio {ratio} not in [0, 1]")));
    }
    let n = topo.switch_count();
    let k = (ratio * n as f64).round() as usize;
    let mut rng = seed.rng();
    let picked = rand::seq::index::sample(&mut rng, n, k);
    Ok(topo
        .clone()
        .with_loss_switches(picked.iter().map(|i| SwitchId(i as u32)))?)
}

/// Bytes each switch counted for each flow, in path order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CounterTable {
    entries: BTreeMap<FlowId, Vec<(SwitchId, u64)>>,
}

impl CounterTable {
    pub fn get(&self, switch: SwitchId, flow: FlowId) -> Option<u64> {
        self.entries
            .get(&flow)?
            .iter()
            .find(|(s, _)| *s == switch)
            .map(|&(_, b)| b)
    }

    /// Counters along the flow's path.
    pub fn along(&self, flow: FlowId) -> Option<&[(SwitchId, u64)]> {
        self.entries.get(&flow).map(Vec::as_slice)
    }

    pub fn insert(&mut self, flow: FlowId, along_path: Vec<(SwitchId, u64)>) {
        self.entries.insert(flow, along_path);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Pushes every packet of every flow along its path. Each switch counts the
/// packets that reach it; a loss switch then drops each counted packet
/// independently with probability `loss_rate`.
pub fn simulate_counters(
    topo: &Topology,
    flows: &[Flow],
    loss_rate: f64,
    seed: RngSeed,
) -> Result<CounterTable, SimError> {
    if !(0.0..=1.0).contains(&loss_rate) {
        return Err(SimError::InvalidParameter(format!("loss rate {loss_rate} not in [0, 1]")));
    }
    let drop = Bernoulli::new(loss_rate).expect("checked range");
    let mut rng = seed.rng();
    let mut table = CounterTable::default();
    for f in flows {
        let packet = u64::from(f.packet_size_bytes);
        let mut alive = f.packets();
        let mut along = Vec::with_capacity(f.path.len());
        for &s in &f.path {
            along.push((s, alive * packet));
            if alive > 0 && topo.is_loss_switch(s) {
                let dropped = (0..alive).filter(|_| drop.sample(&mut rng)).count() as u64;
                alive -= dropped;
            }
        }
        table.insert(f.id, along);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: u32) -> Topology {
        Topology::new(n as usize, (1..n).map(|i| (SwitchId(i - 1), SwitchId(i)))).unwrap()
    }

    #[test]
    fn er_two_switches() {
        let t = gen_erdos_renyi(2, 1.0, RngSeed(3)).unwrap();
        assert_eq!(t.links().len(), 1);
    }

    #[test]
    fn er_parameter_checks() {
        assert!(gen_erdos_renyi(1, 0.5, RngSeed(0)).is_err());
        assert!(gen_erdos_renyi(5, 0.0, RngSeed(0)).is_err());
        assert!(gen_erdos_renyi(5, 1.5, RngSeed(0)).is_err());
        assert_eq!(gen_erdos_renyi(50, 1e-6, RngSeed(0)), Err(SimError::NotConnected(MAX_ATTEMPTS)));
    }

    #[test]
    fn er_hundred_switches_connected() {
        let t = gen_erdos_renyi(100, default_er_probability(100), RngSeed(1)).unwrap();
        assert!(t.is_connected());
        assert_eq!(t.switch_count(), 100);
    }

    #[test]
    fn waxman_two_switches() {
        let t = gen_waxman(2, 1.0, 1.0, RngSeed(9)).unwrap();
        assert_eq!(t.links().len(), 1);
        assert_eq!(t.coordinates().unwrap().len(), 2);
        assert!(gen_waxman(5, 0.0, 0.2, RngSeed(0)).is_err());
    }

    #[test]
    fn waxman_is_deterministic() {
        let a = gen_waxman(60, WAXMAN_ALPHA, WAXMAN_BETA, RngSeed(5));
        let b = gen_waxman(60, WAXMAN_ALPHA, WAXMAN_BETA, RngSeed(5));
        assert_eq!(a, b);
    }

    #[test]
    fn routes_on_line_and_triangle() {
        let t = line(3);
        let mut r = Router::new(&t);
        assert_eq!(r.route(SwitchId(0), SwitchId(2)).unwrap(), vec![SwitchId(0), SwitchId(1), SwitchId(2)]);
        let tri = Topology::new(3, [(SwitchId(0), SwitchId(1)), (SwitchId(1), SwitchId(2)), (SwitchId(0), SwitchId(2))]).unwrap();
        for f in gen_flows(&tri, 200, DEFAULT_VOLUME_RANGE, RngSeed(2)).unwrap() {
            assert!(f.path.len() <= 2);
            assert_ne!(f.first_switch(), f.last_switch());
        }
    }

    #[test]
    fn bfs_prefers_lower_ids() {
        // square 0-1-3, 0-2-3: both two hops; predecessor of 3 is 1
        let t = Topology::new(4, [(SwitchId(0), SwitchId(1)), (SwitchId(0), SwitchId(2)), (SwitchId(1), SwitchId(3)), (SwitchId(2), SwitchId(3))]).unwrap();
        let mut r = Router::new(&t);
        assert_eq!(r.route(SwitchId(0), SwitchId(3)).unwrap(), vec![SwitchId(0), SwitchId(1), SwitchId(3)]);
    }

    #[test]
    fn flows_are_valid() {
        let t = gen_erdos_renyi(30, 0.2, RngSeed(4)).unwrap();
        let flows = gen_flows(&t, 500, DEFAULT_VOLUME_RANGE, RngSeed(8)).unwrap();
        crate::model::validate_flows(&t, &flows).unwrap();
        for f in &flows {
            assert!(f.volume_bytes >= 15_000 - 1500 && f.volume_bytes <= 15_000_000);
            assert_eq!(f.volume_bytes % 1500, 0);
        }
        assert!(gen_flows(&t, 0, DEFAULT_VOLUME_RANGE, RngSeed(8)).unwrap().is_empty());
        assert!(gen_flows(&t, 3, (10, 5), RngSeed(8)).is_err());
    }

    #[test]
    fn loss_marking_counts() {
        let t = line(200);
        assert!(mark_loss_switches(&t, 0.0, RngSeed(1)).unwrap().loss_switches().is_empty());
        assert_eq!(mark_loss_switches(&t, 1.0, RngSeed(1)).unwrap().loss_switches().len(), 200);
        assert_eq!(mark_loss_switches(&t, 0.1, RngSeed(1)).unwrap().loss_switches().len(), 20);
        assert!(mark_loss_switches(&t, 1.1, RngSeed(1)).is_err());
    }

    fn one_flow(path: &[u32], packets: u64) -> Flow {
        Flow {
            id: FlowId(0),
            path: path.iter().copied().map(SwitchId).collect(),
            volume_bytes: packets * 1500,
            packet_size_bytes: 1500,
        }
    }

    #[test]
    fn no_loss_means_full_counts() {
        let t = line(4).with_loss_switches([SwitchId(1), SwitchId(2)]).unwrap();
        let f = one_flow(&[0, 1, 2, 3], 100);
        let c = simulate_counters(&t, &[f], 0.0, RngSeed(1)).unwrap();
        for s in 0..4 {
            assert_eq!(c.get(SwitchId(s), FlowId(0)), Some(150_000));
        }
    }

    #[test]
    fn full_loss_counts_then_drops() {
        let t = line(3).with_loss_switches([SwitchId(0)]).unwrap();
        let f = one_flow(&[0, 1, 2], 10);
        let c = simulate_counters(&t, &[f], 1.0, RngSeed(1)).unwrap();
        assert_eq!(c.get(SwitchId(0), FlowId(0)), Some(15_000));
        assert_eq!(c.get(SwitchId(1), FlowId(0)), Some(0));
        assert_eq!(c.get(SwitchId(2), FlowId(0)), Some(0));
        assert!(simulate_counters(&t, &[], 2.0, RngSeed(1)).is_err());
    }

    #[test]
    fn seed_derivation_separates_streams() {
        let s = RngSeed(7);
        assert_ne!(s.derive(1), s.derive(2));
        assert_eq!(s.derive(1), RngSeed(7).derive(1));
    }
}
