//! Virtual network embedding on a shared substrate: best-fit sub-substrate
//! search with bounded backtracking, an optional heavy-edge-matching
//! coarsening pass, reference embedders, workload generation and an
//! online admission simulator.

pub mod amount;
pub mod bfsn;
pub mod brite;
pub mod graph;
pub mod hem;
pub mod pathing;
pub mod reference;
pub mod sim;
pub mod subgraph;
pub mod workload;

#[cfg(test)]
mod testutil;

pub use amount::Amount;
pub use bfsn::{bfsn_embed, BacktrackCounting, BfsnConfig, EmbedOutcome};
pub use graph::{
    cost, revenue, validate_mapping, GraphError, LinkId, Mapping, NodeId, Path, SubstrateNetwork, ValidationReport,
    VirtualNetwork, VnRequest,
};
pub use hem::{bfsn_hem_embed, coarsen, CoarsenedVn, MergeScan};
pub use pathing::{bfs_reachable, cheapest_feasible_path, path_exists};
pub use subgraph::{candidate_subnetworks, SubSubstrate};
pub use reference::{greedy_embed, oracle_embed, Objective, GREEDY_LABEL};
pub use workload::{read_workload, Workload, WorkloadConfig};
pub use sim::{run_simulation, Accrual, Algorithm, DecisionRecord, MetricSample, SimConfig, SimResult};
