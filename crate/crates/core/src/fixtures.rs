//! Hand-pinned instances used by tests and the acceptance suite.

use crate::model::{Flow, FlowId, SwitchId, Topology};

/// Six-switch, six-flow motivation example.
///
/// Switch `S<k>` is id `k - 1`. Hosts are folded into their attachment
/// switches: H1 at S1, H2 at S2, H3 at S4, H4 at S6, H5 at S5. Only S3's flow
/// set {f1, f2, f4, f5} is fixed by the original description; the remaining
/// paths are a reconstruction in which S6 carries three flows and
/// {S3, S6} is the unique minimum-cost cover. Flow `f<k>` has id `k`.
pub fn motivation_example() -> (Topology, Vec<Flow>) {
    let s = |k: u32| SwitchId(k - 1);
    let links = [
        (s(1), s(3)),
        (s(2), s(3)),
        (s(3), s(4)),
        (s(3), s(5)),
        (s(3), s(6)),
        (s(1), s(6)),
        (s(5), s(6)),
    ];
    let topo = Topology::new(6, links).expect("motivation topology is valid");
    let paths: [&[u32]; 6] = [
        &[1, 3, 2], // f1 H1-H2
        &[1, 3, 4], // f2 H1-H3
        &[1, 6],    // f3 H1-H4
        &[2, 3, 6], // f4 H2-H4
        &[5, 3, 2], // f5 H5-H2
        &[6, 5],    // f6 H4-H5
    ];
    let flows = paths
        .iter()
        .enumerate()
        .map(|(i, p)| Flow {
            id: FlowId(i as u32 + 1),
            path: p.iter().map(|&k| s(k)).collect(),
            volume_bytes: 150_000,
            packet_size_bytes: 1500,
        })
        .collect();
    (topo, flows)
}

/// Id of switch `S3` in [`motivation_example`].
pub const MOTIVATION_S3: SwitchId = SwitchId(2);
/// Id of switch `S6` in [`motivation_example`].
pub const MOTIVATION_S6: SwitchId = SwitchId(5);
