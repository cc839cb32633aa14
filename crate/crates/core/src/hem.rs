//! Heavy-edge-matching coarsening and the coarsen-then-embed variant of the
//! best-fit embedder.
//!
//! Coarsening repeatedly merges the endpoints of the heaviest link whose
//! endpoint CPU fits under a cap, so that the heaviest links end up inside
//! super-nodes and cost nothing to embed. Links that stay between super-nodes
//! are bundled, but each original link still gets its own substrate path.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::amount::Amount;
use crate::bfsn::{embed_on, BfsnConfig, Constituent, DemandGraph, DemandLink, EmbedOutcome};
use crate::graph::{GraphError, LinkId, Mapping, NodeId, Path, SubstrateNetwork, VirtualNetwork};
use crate::subgraph::candidate_subnetworks;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperNode {
    /// Smallest member id.
    pub id: NodeId,
    /// Sorted ascending.
    pub members: Vec<NodeId>,
    pub cpu_demand: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperLink {
    /// Smallest constituent id.
    pub id: LinkId,
    /// Positions in [`CoarsenedVn::super_nodes`], smaller first.
    pub ends: (usize, usize),
    /// Sorted ascending.
    pub constituents: Vec<LinkId>,
    pub bw_demand: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoarsenedVn {
    /// Sorted by id.
    pub super_nodes: Vec<SuperNode>,
    /// Sorted by id.
    pub super_links: Vec<SuperLink>,
    /// Original links absorbed inside a super-node, sorted.
    pub internal_links: Vec<LinkId>,
    pub cpu_max: Amount,
    pub merges: usize,
    /// Original node → position in `super_nodes`.
    owner: Vec<usize>,
}

impl CoarsenedVn {
    pub fn owner_of(&self, vnode: NodeId) -> usize {
        self.owner[vnode]
    }

    /// The coarsened graph as an ordinary virtual network.
    pub fn to_virtual_network(&self) -> Result<VirtualNetwork, GraphError> {
        let cpu: Vec<Amount> = self.super_nodes.iter().map(|s| s.cpu_demand).collect();
        let links: Vec<_> = self
            .super_links
            .iter()
            .map(|l| (l.ends.0, l.ends.1, l.bw_demand))
            .collect();
        VirtualNetwork::new(&cpu, &links)
    }

    /// Demand graph whose links carry every constituent separately.
    pub fn demand_graph(&self, vn: &VirtualNetwork) -> DemandGraph {
        let links = self
            .super_links
            .iter()
            .map(|l| DemandLink {
                ends: l.ends,
                parts: l
                    .constituents
                    .iter()
                    .map(|&c| Constituent {
                        vlink: c,
                        bw: vn.link(c).bw_demand,
                    })
                    .collect(),
            })
            .collect();
        DemandGraph::new(self.super_nodes.iter().map(|s| s.cpu_demand).collect(), links)
    }
}

/// How the link list is walked after a merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergeScan {
    /// Re-sort the collapsed links and start from the heaviest again.
    #[default]
    Restart,
    /// One pass down the original links in descending bandwidth order.
    Continue,
}

/// Collapses original links by the current owner of their endpoints.
/// Returns super-links keyed by owner pair (group ids), plus internal links.
fn collapse(vn: &VirtualNetwork, group: &[NodeId]) -> (BTreeMap<(NodeId, NodeId), (Amount, Vec<LinkId>)>, Vec<LinkId>) {
    let mut bundles: BTreeMap<(NodeId, NodeId), (Amount, Vec<LinkId>)> = BTreeMap::new();
    let mut internal = Vec::new();
    for l in vn.links() {
        let (a, b) = (group[l.ends.0], group[l.ends.1]);
        if a == b {
            internal.push(l.id);
        } else {
            let e = bundles.entry((a.min(b), a.max(b))).or_insert((Amount::ZERO, Vec::new()));
            e.0 += l.bw_demand;
            e.1.push(l.id);
        }
    }
    (bundles, internal)
}

fn merge(group: &mut [NodeId], cpu: &mut BTreeMap<NodeId, Amount>, a: NodeId, b: NodeId) {
    let (keep, gone) = (a.min(b), a.max(b));
    for g in group.iter_mut() {
        if *g == gone {
            *g = keep;
        }
    }
    let moved = cpu.remove(&gone).expect("live group");
    *cpu.get_mut(&keep).expect("live group") += moved;
}

/// Heavy-edge-matching coarsening under a per-super-node CPU cap.
pub fn coarsen(vn: &VirtualNetwork, cpu_max: Amount) -> CoarsenedVn {
    coarsen_with(vn, cpu_max, MergeScan::Restart)
}

pub fn coarsen_with(vn: &VirtualNetwork, cpu_max: Amount, scan: MergeScan) -> CoarsenedVn {
    let n = vn.node_count();
    // group id of every original node: the smallest member of its super-node
    let mut group: Vec<NodeId> = (0..n).collect();
    let mut cpu: BTreeMap<NodeId, Amount> = vn.nodes().iter().map(|v| (v.id, v.cpu_demand)).collect();
    let mut merges = 0;

    match scan {
        MergeScan::Restart => loop {
            let (bundles, _) = collapse(vn, &group);
            let mut ranked: Vec<_> = bundles
                .iter()
                .map(|(&(a, b), (bw, parts))| (*bw, parts[0], a, b))
                .collect();
            ranked.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
            let Some(&(_, _, a, b)) = ranked.iter().find(|&&(_, _, a, b)| cpu[&a] + cpu[&b] <= cpu_max) else {
                break;
            };
            merge(&mut group, &mut cpu, a, b);
            merges += 1;
        },
        MergeScan::Continue => {
            let mut ranked: Vec<_> = vn.links().iter().collect();
            ranked.sort_by(|x, y| y.bw_demand.cmp(&x.bw_demand).then(x.id.cmp(&y.id)));
            for l in ranked {
                let (a, b) = (group[l.ends.0], group[l.ends.1]);
                if a != b && cpu[&a] + cpu[&b] <= cpu_max {
                    merge(&mut group, &mut cpu, a, b);
                    merges += 1;
                }
            }
        }
    }

    let position: BTreeMap<NodeId, usize> = cpu.keys().enumerate().map(|(i, &g)| (g, i)).collect();
    let mut super_nodes: Vec<SuperNode> = cpu
        .iter()
        .map(|(&id, &cpu_demand)| SuperNode {
            id,
            members: Vec::new(),
            cpu_demand,
        })
        .collect();
    for (v, &g) in group.iter().enumerate() {
        super_nodes[position[&g]].members.push(v);
    }
    let (bundles, internal_links) = collapse(vn, &group);
    let mut super_links: Vec<SuperLink> = bundles
        .into_iter()
        .map(|((a, b), (bw_demand, constituents))| SuperLink {
            id: constituents[0],
            ends: (position[&a], position[&b]),
            constituents,
            bw_demand,
        })
        .collect();
    super_links.sort_by_key(|l| l.id);
    CoarsenedVn {
        super_nodes,
        super_links,
        internal_links,
        cpu_max,
        merges,
        owner: group.iter().map(|g| position[g]).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HemError {
    #[error("coarsening covers {coarse} nodes, virtual network has {actual}")]
    NodeCountMismatch { coarse: usize, actual: usize },
    #[error("expected {expected} super-node hosts, got {got}")]
    HostCountMismatch { expected: usize, got: usize },
    #[error("virtual link {0} has no path")]
    MissingPath(LinkId),
    #[error("path for virtual link {0} does not join its endpoints' hosts")]
    PathEndpoints(LinkId),
}

/// Placement of a coarsened request: one host per super-node and one path per
/// original inter-super-node link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoarseMapping {
    pub hosts: Vec<NodeId>,
    pub constituent_paths: BTreeMap<LinkId, Path>,
}

/// Maps every member to its super-node's host, internal links to empty paths
/// and constituent links to their own paths.
pub fn expand_mapping(coarse: &CoarseMapping, cvn: &CoarsenedVn, vn: &VirtualNetwork) -> Result<Mapping, HemError> {
    if cvn.owner.len() != vn.node_count() {
        return Err(HemError::NodeCountMismatch {
            coarse: cvn.owner.len(),
            actual: vn.node_count(),
        });
    }
    if coarse.hosts.len() != cvn.super_nodes.len() {
        return Err(HemError::HostCountMismatch {
            expected: cvn.super_nodes.len(),
            got: coarse.hosts.len(),
        });
    }
    let nodes: Vec<NodeId> = cvn.owner.iter().map(|&s| coarse.hosts[s]).collect();
    let mut links = Vec::with_capacity(vn.link_count());
    for l in vn.links() {
        let (ha, hb) = (nodes[l.ends.0], nodes[l.ends.1]);
        let path = if cvn.owner[l.ends.0] == cvn.owner[l.ends.1] {
            Path::empty(ha)
        } else {
            coarse
                .constituent_paths
                .get(&l.id)
                .cloned()
                .ok_or(HemError::MissingPath(l.id))?
        };
        let ends = (path.src(), path.dst());
        if ends != (ha, hb) && ends != (hb, ha) {
            return Err(HemError::PathEndpoints(l.id));
        }
        links.push(path);
    }
    Ok(Mapping { nodes, links })
}

/// Coarsens `vn` per candidate sub-substrate (cap = the largest residual CPU
/// among its hosts) and embeds the coarsened request there.
pub fn bfsn_hem_embed(vn: &VirtualNetwork, sn: &SubstrateNetwork, cfg: &BfsnConfig) -> EmbedOutcome {
    bfsn_hem_embed_with(vn, sn, cfg, MergeScan::Restart)
}

pub fn bfsn_hem_embed_with(vn: &VirtualNetwork, sn: &SubstrateNetwork, cfg: &BfsnConfig, scan: MergeScan) -> EmbedOutcome {
    let subs = candidate_subnetworks(sn, vn, cfg.max_hops);
    let mut backtracks = 0;
    for (i, sub) in subs.iter().enumerate() {
        let cpu_max = sub
            .host_nodes
            .iter()
            .map(|&h| sn.node(h).cpu_residual)
            .max()
            .unwrap_or(Amount::ZERO);
        let cvn = coarsen_with(vn, cpu_max, scan);
        let g = cvn.demand_graph(vn);
        let (solution, spent) = embed_on(&g, sn, sub, cfg);
        backtracks += spent;
        let Some(sol) = solution else { continue };
        let mut constituent_paths = BTreeMap::new();
        for (link, paths) in g.links.iter().zip(sol.link_paths) {
            for (part, path) in link.parts.iter().zip(paths) {
                constituent_paths.insert(part.vlink, path);
            }
        }
        let coarse = CoarseMapping {
            hosts: sol.hosts,
            constituent_paths,
        };
        let mapping = expand_mapping(&coarse, &cvn, vn).expect("coarsening built from this request");
        return EmbedOutcome {
            mapping: Some(mapping),
            subnets_tried: i + 1,
            backtracks,
            subnet_index: Some(i),
        };
    }
    EmbedOutcome::rejected(subs.len(), backtracks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bfsn::bfsn_embed;
    use crate::graph::fixtures::*;
    use crate::graph::{cost, revenue, validate_mapping};
    use crate::testutil::arb_vn;
    use proptest::prelude::*;

    fn chain() -> VirtualNetwork {
        VirtualNetwork::new(&[amt(5.0), amt(8.0), amt(3.0)], &[(0, 1, amt(4.0)), (1, 2, amt(2.0))]).unwrap()
    }

    #[test]
    fn chain_merges_heaviest_link_only() {
        let cvn = coarsen(&chain(), amt(15.0));
        assert_eq!(cvn.merges, 1);
        assert_eq!(
            cvn.super_nodes,
            vec![
                SuperNode { id: 0, members: vec![0, 1], cpu_demand: amt(13.0) },
                SuperNode { id: 2, members: vec![2], cpu_demand: amt(3.0) },
            ]
        );
        assert_eq!(
            cvn.super_links,
            vec![SuperLink { id: 1, ends: (0, 1), constituents: vec![1], bw_demand: amt(2.0) }]
        );
        assert_eq!(cvn.internal_links, vec![0]);
    }

    #[test]
    fn larger_cap_swallows_the_chain() {
        let cvn = coarsen(&chain(), amt(16.0));
        assert_eq!(cvn.super_nodes.len(), 1);
        assert_eq!(cvn.super_nodes[0].members, vec![0, 1, 2]);
        assert!(cvn.super_links.is_empty());
        assert_eq!(cvn.internal_links, vec![0, 1]);
    }

    #[test]
    fn tiny_cap_is_identity() {
        let cvn = coarsen(&chain(), amt(7.0));
        assert_eq!(cvn.merges, 0);
        assert_eq!(cvn.super_nodes.len(), 3);
        assert!(cvn.super_nodes.iter().all(|s| s.members == vec![s.id]));
        assert_eq!(cvn.super_links.len(), 2);
    }

    #[test]
    fn triangle_collapses_parallel_links() {
        let vn = VirtualNetwork::new(
            &[amt(2.0), amt(2.0), amt(2.0)],
            &[(0, 1, amt(5.0)), (1, 2, amt(4.0)), (2, 0, amt(3.0))],
        )
        .unwrap();
        let cvn = coarsen(&vn, amt(4.0));
        assert_eq!(cvn.merges, 1);
        assert_eq!(cvn.super_nodes[0].members, vec![0, 1]);
        assert_eq!(
            cvn.super_links,
            vec![SuperLink { id: 1, ends: (0, 1), constituents: vec![1, 2], bw_demand: amt(7.0) }]
        );
        assert_eq!(cvn.internal_links, vec![0]);
    }

    #[test]
    fn continue_scan_differs_from_restart() {
        // path 0-1-2-3 with bw 10, 9, 8 and cpu 1 each, cap 2.
        // Restart: merge 01, then {01}-2 (2+1 > 2) is skipped, merge 23.
        // Continue: same here; on a star they differ in which bundles form.
        let vn = VirtualNetwork::new(
            &[amt(1.0), amt(1.0), amt(1.0), amt(1.0)],
            &[(0, 1, amt(10.0)), (1, 2, amt(9.0)), (2, 3, amt(8.0))],
        )
        .unwrap();
        let r = coarsen_with(&vn, amt(2.0), MergeScan::Restart);
        let c = coarsen_with(&vn, amt(2.0), MergeScan::Continue);
        assert_eq!(r.super_nodes, c.super_nodes);

        // triangle where restart re-ranks the collapsed bundle {bc, ca} = 7
        // above the untouched link d (6)
        let vn = VirtualNetwork::new(
            &[amt(1.0), amt(1.0), amt(1.0), amt(1.0)],
            &[(0, 1, amt(5.0)), (1, 2, amt(4.0)), (2, 0, amt(3.0)), (2, 3, amt(4.5))],
        )
        .unwrap();
        let r = coarsen_with(&vn, amt(3.0), MergeScan::Restart);
        let c = coarsen_with(&vn, amt(3.0), MergeScan::Continue);
        // restart: 01 merge, then bundle {01}-2 (7) beats 23 (4.5)
        assert_eq!(r.super_nodes[0].members, vec![0, 1, 2]);
        // continue: 01, then 23 (4.5) comes before 12 (4)
        assert_eq!(c.super_nodes.iter().map(|s| s.members.clone()).collect::<Vec<_>>(), vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn expand_two_super_nodes() {
        let sn = sn_t();
        let vn = chain();
        let cvn = coarsen(&vn, amt(15.0));
        let xy = path(&sn, &[A, B]);
        let coarse = CoarseMapping {
            hosts: vec![A, B],
            constituent_paths: BTreeMap::from([(1, xy.clone())]),
        };
        let m = expand_mapping(&coarse, &cvn, &vn).unwrap();
        assert_eq!(m.nodes, vec![A, A, B]);
        assert_eq!(m.links, vec![Path::empty(A), xy]);
    }

    #[test]
    fn expand_identity_and_all_in_one() {
        let sn = sn_t();
        let vn = vn_t();
        let cvn = coarsen(&vn, amt(1.0));
        let m = m_t(&sn);
        let coarse = CoarseMapping {
            hosts: m.nodes.clone(),
            constituent_paths: m.links.iter().cloned().enumerate().collect(),
        };
        assert_eq!(expand_mapping(&coarse, &cvn, &vn).unwrap(), m);

        let cvn = coarsen(&vn, amt(100.0));
        let coarse = CoarseMapping { hosts: vec![D], constituent_paths: BTreeMap::new() };
        let m = expand_mapping(&coarse, &cvn, &vn).unwrap();
        assert_eq!(cost(&vn, &m), vn.total_cpu());
    }

    #[test]
    fn expand_rejects_inconsistent_input() {
        let vn = chain();
        let cvn = coarsen(&vn, amt(15.0));
        let coarse = CoarseMapping { hosts: vec![A], constituent_paths: BTreeMap::new() };
        assert!(matches!(expand_mapping(&coarse, &cvn, &vn), Err(HemError::HostCountMismatch { .. })));
        let coarse = CoarseMapping { hosts: vec![A, B], constituent_paths: BTreeMap::new() };
        assert_eq!(expand_mapping(&coarse, &cvn, &vn), Err(HemError::MissingPath(1)));
        let sn = sn_t();
        let coarse = CoarseMapping { hosts: vec![A, B], constituent_paths: BTreeMap::from([(1, path(&sn, &[C, D]))]) };
        assert_eq!(expand_mapping(&coarse, &cvn, &vn), Err(HemError::PathEndpoints(1)));
        let four = VirtualNetwork::new(&[amt(1.0); 4], &[(0, 1, amt(1.0)), (1, 2, amt(1.0)), (2, 3, amt(1.0))]).unwrap();
        assert_eq!(
            expand_mapping(&coarse, &cvn, &four),
            Err(HemError::NodeCountMismatch { coarse: 3, actual: 4 })
        );
    }

    #[test]
    fn ring_request_coarsens_to_one_node() {
        let sn = sn_t();
        let vn = vn_t();
        let cvn = coarsen(&vn, amt(10.0));
        assert_eq!(cvn.super_nodes.len(), 1);
        let out = bfsn_hem_embed(&vn, &sn, &BfsnConfig::new(2, Some(9)));
        let m = out.mapping.unwrap();
        assert_eq!(m.nodes, vec![A, A, A]);
        assert_eq!(cost(&vn, &m), amt(9.0));
        assert!(validate_mapping(&sn, &vn, &m, 2).is_clean());
    }

    #[test]
    fn no_merge_behaves_like_bfsn() {
        let sn = sn_t();
        let vn = VirtualNetwork::new(&[amt(6.0), amt(6.0)], &[(0, 1, amt(5.0))]).unwrap();
        let cfg = BfsnConfig::new(2, Some(6));
        assert_eq!(bfsn_hem_embed(&vn, &sn, &cfg), bfsn_embed(&vn, &sn, &cfg));
    }

    #[test]
    fn bundle_splits_over_disjoint_routes() {
        // nodes 0 and 3 (cpu 10) are the only ones big enough for a
        // super-node; routes 0-1-3 and 0-2-3 carry 6 each, so a bundle of two
        // 5-bw links fits no single route. The 1-2 link only pads the pocket's
        // internal bandwidth past the request total.
        let sn = SubstrateNetwork::from_parts(
            &[amt(10.0), amt(4.0), amt(4.0), amt(10.0)],
            &[
                (0, 1, amt(6.0)),
                (1, 3, amt(6.0)),
                (0, 2, amt(6.0)),
                (2, 3, amt(6.0)),
                (0, 3, amt(1.0)),
                (1, 2, amt(30.0)),
            ],
        )
        .unwrap();
        // a(4)-b(4) on one side, c(4)-d(4) on the other; ab=cd=20 heavy, ac=bd=5
        let vn = VirtualNetwork::new(
            &[amt(4.0), amt(4.0), amt(4.0), amt(4.0)],
            &[(0, 1, amt(20.0)), (2, 3, amt(20.0)), (0, 2, amt(5.0)), (1, 3, amt(5.0))],
        )
        .unwrap();
        let cvn = coarsen(&vn, amt(10.0));
        assert_eq!(cvn.super_links.len(), 1);
        assert_eq!(cvn.super_links[0].bw_demand, amt(10.0));
        let m = bfsn_hem_embed(&vn, &sn, &BfsnConfig::new(2, Some(12))).mapping.unwrap();
        assert!(validate_mapping(&sn, &vn, &m, 2).is_clean());
        assert_eq!(m.nodes, vec![0, 0, 3, 3]);
        assert_ne!(m.links[2].nodes, m.links[3].nodes);
        assert_eq!(m.links[2].hops(), 2);
        assert_eq!(m.links[3].hops(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]

        #[test]
        fn coarsening_invariants(vn in arb_vn(10, 12, 9), cap in 1i64..40, continue_scan in any::<bool>()) {
            let scan = if continue_scan { MergeScan::Continue } else { MergeScan::Restart };
            let cap = Amount::from_whole(cap);
            let cvn = coarsen_with(&vn, cap, scan);
            // conservation
            prop_assert_eq!(cvn.super_nodes.iter().map(|s| s.cpu_demand).sum::<Amount>(), vn.total_cpu());
            let internal_bw: Amount = cvn.internal_links.iter().map(|&l| vn.link(l).bw_demand).sum();
            prop_assert_eq!(cvn.super_links.iter().map(|l| l.bw_demand).sum::<Amount>() + internal_bw, vn.total_bw());
            // partition and cap
            let mut members: Vec<_> = cvn.super_nodes.iter().flat_map(|s| s.members.clone()).collect();
            members.sort_unstable();
            prop_assert_eq!(members, (0..vn.node_count()).collect::<Vec<_>>());
            for s in &cvn.super_nodes {
                prop_assert!(s.members.len() == 1 || s.cpu_demand <= cap);
                prop_assert_eq!(s.id, s.members[0]);
            }
            // every original link exactly once
            let mut links: Vec<_> = cvn.super_links.iter().flat_map(|l| l.constituents.clone()).chain(cvn.internal_links.clone()).collect();
            links.sort_unstable();
            prop_assert_eq!(links, (0..vn.link_count()).collect::<Vec<_>>());
            // merges cut links: each merge removes at least one working link
            prop_assert!(cvn.super_links.len() + cvn.merges <= vn.link_count());
            // revenue is invariant
            let coarse_vn = cvn.to_virtual_network().unwrap();
            prop_assert_eq!(revenue(&coarse_vn) + internal_bw, revenue(&vn));
        }

        #[test]
        fn restart_coarsening_is_a_fixpoint(vn in arb_vn(10, 12, 9), cap in 1i64..40) {
            let cap = Amount::from_whole(cap);
            let once = coarsen(&vn, cap).to_virtual_network().unwrap();
            prop_assert_eq!(coarsen(&once, cap).merges, 0);
        }
    }
}
