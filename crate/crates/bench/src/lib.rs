//! Shared fixtures for the embedding benchmarks.

use vne_core::sim::embed_request;
use vne_core::workload::generate_workload;
use vne_core::{SimConfig, SubstrateNetwork, VirtualNetwork, VnRequest, Workload, WorkloadConfig};

/// Desk-scale workload: 100-node substrate, 500 links, `vn_count` requests.
pub fn desk_workload(seed: u64, vn_count: usize) -> Workload {
    let cfg = WorkloadConfig { seed, sn_nodes: 100, sn_links: 500, vn_count, ..WorkloadConfig::default() };
    generate_workload(&cfg).expect("desk-scale config is valid").load()
}

/// A partly loaded substrate and a batch of requests to embed against it.
///
/// The first `preload` requests are embedded with BFSN and never released,
/// which leaves the substrate fragmented the way it is mid-simulation.
pub struct LoadedState {
    pub substrate: SubstrateNetwork,
    pub probes: Vec<VnRequest>,
}

pub fn loaded_state(seed: u64, preload: usize, probes: usize) -> LoadedState {
    let w = desk_workload(seed, preload + probes);
    let cfg = SimConfig::default();
    let mut substrate = w.substrate.clone();
    for req in &w.requests[..preload] {
        if let Some(m) = embed_request(&cfg, req, &substrate).mapping {
            substrate.allocate(&req.vn, &m).expect("fresh mapping fits");
        }
    }
    LoadedState { substrate, probes: w.requests[preload..].to_vec() }
}

/// The largest request in a batch, by node count.
pub fn largest(probes: &[VnRequest]) -> &VirtualNetwork {
    &probes.iter().max_by_key(|r| r.vn.node_count()).expect("non-empty batch").vn
}
