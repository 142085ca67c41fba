#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use flowcover::simkit::{gen_erdos_renyi, gen_flows, RngSeed};
use flowcover::{CostModel, Flow, SwitchId, Topology};

/// Bytes of one query answering `entries` flow entries, written out by hand.
pub fn query_bytes(model: &CostModel, entries: u64) -> u64 {
    model.l_req + model.l_reply_header + model.l_single_flow_entry * entries
}

pub fn harmonic(k: usize) -> f64 {
    (1..=k).map(|i| 1.0 / i as f64).sum()
}

/// Flows passing each switch, counted straight from the paths.
pub fn load(flows: &[Flow]) -> BTreeMap<SwitchId, usize> {
    let mut out = BTreeMap::new();
    for f in flows {
        for s in f.path.iter().collect::<BTreeSet<_>>() {
            *out.entry(*s).or_insert(0) += 1;
        }
    }
    out
}

/// Cheapest cover by brute force: every subset of flow-carrying switches is
/// polled in full and each flow it misses gets its own single-flow query.
/// Returns the optimum and every switch subset attaining it.
pub fn brute_force_optimum(flows: &[Flow], model: &CostModel) -> (u64, Vec<BTreeSet<SwitchId>>) {
    let counts = load(flows);
    let switches: Vec<SwitchId> = counts.keys().copied().collect();
    assert!(switches.len() <= 16, "brute force is exponential");
    let single = query_bytes(model, 1);
    let mut best = u64::MAX;
    let mut argmin = Vec::new();
    for mask in 0u32..(1 << switches.len()) {
        let chosen: BTreeSet<SwitchId> =
            switches.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, s)| *s).collect();
        let mut cost: u64 = chosen.iter().map(|s| query_bytes(model, counts[s] as u64)).sum();
        cost += single * flows.iter().filter(|f| !f.path.iter().any(|s| chosen.contains(s))).count() as u64;
        if cost < best {
            best = cost;
            argmin.clear();
        }
        if cost == best {
            argmin.push(chosen);
        }
    }
    (best, argmin)
}

/// Small connected instance for oracle comparisons.
pub fn small_instance(n: usize, m: usize, seed: u64) -> (Topology, Vec<Flow>) {
    let p = 0.35;
    let topo = gen_erdos_renyi(n, p, RngSeed(seed)).expect("small ER connects within the attempt budget");
    let flows = gen_flows(&topo, m, (1500, 150_000), RngSeed(seed).derive(99)).unwrap();
    (topo, flows)
}
