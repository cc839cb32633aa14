//! Candidate sub-substrate networks: the pockets of the substrate on which a
//! request is tried, best fit (smallest sufficient) first.
//!
//! Hosting candidates are the substrate nodes with enough residual CPU for the
//! request's smallest virtual node. Two candidates are adjacent when some
//! loop-free path of at most `max_hops` links, each with residual bandwidth
//! for the request's smallest virtual link, joins them. Relay nodes on such a
//! path need not be candidates themselves.

use crate::amount::Amount;
use crate::graph::{NodeId, SubstrateNetwork, VirtualNetwork};
use crate::pathing::ReachTree;

/// A connected pocket of hosting candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubSubstrate {
    /// Sorted ascending.
    pub host_nodes: Vec<NodeId>,
    pub total_resources: Amount,
}

impl SubSubstrate {
    pub fn new(sn: &SubstrateNetwork, mut host_nodes: Vec<NodeId>) -> SubSubstrate {
        host_nodes.sort_unstable();
        host_nodes.dedup();
        let mut sub = SubSubstrate {
            host_nodes,
            total_resources: Amount::ZERO,
        };
        sub.total_resources = total_available_resources(&sub, sn);
        sub
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.host_nodes.binary_search(&n).is_ok()
    }

    fn smallest_member(&self) -> NodeId {
        self.host_nodes.first().copied().unwrap_or(NodeId::MAX)
    }
}

/// The filtering thresholds a request imposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DemandFloor {
    pub min_cpu: Amount,
    pub min_bw: Amount,
}

impl DemandFloor {
    pub fn of(vn: &VirtualNetwork) -> DemandFloor {
        DemandFloor {
            min_cpu: vn.min_cpu().unwrap_or(Amount::ZERO),
            min_bw: vn.min_bw().unwrap_or(Amount::ZERO),
        }
    }
}

/// Components of the path-adjacency relation over hosting candidates, before
/// any resource cull. Discovered by scanning candidates in ascending id order
/// and growing each breadth-first; members of each component are sorted.
pub fn filtered_components(sn: &SubstrateNetwork, floor: DemandFloor, max_hops: usize) -> Vec<Vec<NodeId>> {
    let n = sn.node_count();
    let eligible: Vec<bool> = sn.nodes().iter().map(|x| x.cpu_residual >= floor.min_cpu).collect();
    let mut assigned = vec![false; n];
    let mut components = Vec::new();
    for start in 0..n {
        if !eligible[start] || assigned[start] {
            continue;
        }
        assigned[start] = true;
        let mut members = vec![start];
        let mut next = 0;
        while next < members.len() {
            let x = members[next];
            next += 1;
            let tree = ReachTree::grow(sn, x, max_hops, floor.min_bw, None);
            for &y in tree.reached() {
                if eligible[y] && !assigned[y] {
                    assigned[y] = true;
                    members.push(y);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

/// Candidate sub-substrates for `vn`, culled by [`has_enough_resources`] and
/// sorted ascending by total available resources (ties: smallest member id).
pub fn candidate_subnetworks(sn: &SubstrateNetwork, vn: &VirtualNetwork, max_hops: usize) -> Vec<SubSubstrate> {
    if vn.node_count() == 0 {
        return Vec::new();
    }
    let mut subs: Vec<SubSubstrate> = filtered_components(sn, DemandFloor::of(vn), max_hops)
        .into_iter()
        .map(|members| SubSubstrate::new(sn, members))
        .filter(|sub| has_enough_resources(sub, sn, vn))
        .collect();
    subs.sort_by_key(|s| (s.total_resources, s.smallest_member()));
    subs
}

/// Aggregate pruning test: the pocket's residual CPU covers the request's CPU
/// and the residual bandwidth of links internal to the pocket covers the
/// request's bandwidth.
pub fn has_enough_resources(sub: &SubSubstrate, sn: &SubstrateNetwork, vn: &VirtualNetwork) -> bool {
    if sub.host_nodes.is_empty() {
        return false;
    }
    let cpu: Amount = sub.host_nodes.iter().map(|&n| sn.node(n).cpu_residual).sum();
    let bw: Amount = sn
        .links()
        .iter()
        .filter(|l| sub.contains(l.ends.0) && sub.contains(l.ends.1))
        .map(|l| l.bw_residual)
        .sum();
    cpu >= vn.total_cpu() && bw >= vn.total_bw()
}

/// Σ over host nodes of residual CPU plus the residual bandwidth of incident
/// links internal to the pocket (so each internal link counts twice).
pub fn total_available_resources(sub: &SubSubstrate, sn: &SubstrateNetwork) -> Amount {
    sub.host_nodes
        .iter()
        .map(|&n| {
            sn.node(n).cpu_residual
                + sn
                    .neighbors(n)
                    .iter()
                    .filter(|&&(m, _)| sub.contains(m))
                    .map(|&(_, l)| sn.link(l).bw_residual)
                    .sum::<Amount>()
        })
        .sum()
}
