//! Low-cost flow statistics collection for software defined networks.
//!
//! The controller can ask a switch for one flow's counters (exact match) or
//! for every flow it holds (wildcard match). Choosing which switches to poll
//! wholesale and which flows to poll one by one is a weighted set cover
//! problem over the active flows; [`optimizer`] builds and solves it,
//! [`churn`] keeps the resulting scheme valid while flows come and go, and
//! [`simkit`] plus [`experiments`] provide the seeded simulation used to
//! measure cost and accuracy.

pub mod churn;
pub mod cli;
pub mod experiments;
pub mod fixtures;
pub mod format;
pub mod model;
pub mod optimizer;
pub mod simkit;

pub use model::{covers, per_flow_baseline_cost, scheme_cost, CostModel, Flow, FlowId, FlowsAt, PollingScheme, SwitchId, Topology};
