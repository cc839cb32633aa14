//! Best-fit sub-substrate embedding.
//!
//! A request is embedded onto the candidate sub-substrates in ascending order
//! of their available resources. On each one, virtual nodes are placed in a
//! resource-sorted breadth-first order; every placement picks the cheapest
//! host that can reach all already-placed neighbors within the hop limit, a
//! host may take several nodes of the same request, and dead ends backtrack
//! to the previous node under a bounded budget.
//!
//! The recursion runs over a [`DemandGraph`], which is either a plain virtual
//! network or a coarsened one whose links bundle several original links that
//! each need their own substrate path.

use std::collections::VecDeque;

use crate::amount::Amount;
use crate::graph::{LinkId, Mapping, NodeId, Path, SubstrateNetwork, VirtualNetwork};
use crate::pathing::{cheapest_feasible_path, ReachTree};
use crate::subgraph::{candidate_subnetworks, SubSubstrate};

/// One original virtual link carried by a demand link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Constituent {
    pub vlink: LinkId,
    pub bw: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandLink {
    pub ends: (usize, usize),
    /// Sorted by descending bandwidth, ties by original link id; paths are
    /// committed in this order.
    pub parts: Vec<Constituent>,
}

impl DemandLink {
    pub fn total_bw(&self) -> Amount {
        self.parts.iter().map(|p| p.bw).sum()
    }

    fn widest(&self) -> Amount {
        self.parts.first().map_or(Amount::ZERO, |p| p.bw)
    }
}

/// The graph whose nodes get hosts: a virtual network, or a coarsening of one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandGraph {
    pub cpu: Vec<Amount>,
    pub links: Vec<DemandLink>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl DemandGraph {
    pub fn new(cpu: Vec<Amount>, mut links: Vec<DemandLink>) -> DemandGraph {
        let mut adjacency = vec![Vec::new(); cpu.len()];
        for (i, l) in links.iter_mut().enumerate() {
            l.parts.sort_by(|a, b| b.bw.cmp(&a.bw).then(a.vlink.cmp(&b.vlink)));
            adjacency[l.ends.0].push((l.ends.1, i));
            adjacency[l.ends.1].push((l.ends.0, i));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        DemandGraph { cpu, links, adjacency }
    }

    /// One demand node per virtual node, one single-constituent link per
    /// virtual link.
    pub fn from_vn(vn: &VirtualNetwork) -> DemandGraph {
        let links = vn
            .links()
            .iter()
            .map(|l| DemandLink {
                ends: l.ends,
                parts: vec![Constituent { vlink: l.id, bw: l.bw_demand }],
            })
            .collect();
        DemandGraph::new(vn.nodes().iter().map(|n| n.cpu_demand).collect(), links)
    }

    pub fn node_count(&self) -> usize {
        self.cpu.len()
    }

    /// `(neighbor, demand link)` pairs sorted by neighbor.
    pub fn neighbors(&self, n: usize) -> &[(usize, usize)] {
        &self.adjacency[n]
    }

    /// CPU plus the bandwidth of every incident link.
    pub fn resources(&self, n: usize) -> Amount {
        self.cpu[n]
            + self.adjacency[n]
                .iter()
                .map(|&(_, l)| self.links[l].total_bw())
                .sum::<Amount>()
    }
}

/// The order in which virtual nodes are placed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbedOrder {
    pub sequence: Vec<usize>,
    pub tree_parent: Vec<Option<usize>>,
}

/// Breadth-first order from the node with the largest resources, each level
/// sorted by descending resources (ties: smaller id first).
pub fn build_embed_order(vn: &VirtualNetwork) -> EmbedOrder {
    order_demand_graph(&DemandGraph::from_vn(vn))
}

pub fn order_demand_graph(g: &DemandGraph) -> EmbedOrder {
    let n = g.node_count();
    let resources: Vec<Amount> = (0..n).map(|v| g.resources(v)).collect();
    let by_resources = |a: &usize, b: &usize| resources[*b].cmp(&resources[*a]).then(a.cmp(b));

    let mut sequence = Vec::with_capacity(n);
    let mut tree_parent = vec![None; n];
    let mut visited = vec![false; n];
    // Each pass seeds one connected piece; a connected graph needs just one.
    while sequence.len() < n {
        let root = (0..n).filter(|&v| !visited[v]).min_by(by_resources).expect("unvisited node");
        visited[root] = true;
        let mut level = vec![root];
        while !level.is_empty() {
            sequence.extend_from_slice(&level);
            let mut next = Vec::new();
            for &x in &level {
                for &(y, _) in g.neighbors(x) {
                    if !visited[y] {
                        visited[y] = true;
                        tree_parent[y] = Some(x);
                        next.push(y);
                    }
                }
            }
            next.sort_by(by_resources);
            level = next;
        }
    }
    EmbedOrder { sequence, tree_parent }
}

/// How the backtrack budget is consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BacktrackCounting {
    /// One unit each time a virtual node runs out of candidate hosts.
    #[default]
    Exhaustions,
    /// One unit for every undone placement.
    EveryDelete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BfsnConfig {
    pub max_hops: usize,
    /// `None` searches without a bound.
    pub max_backtrack: Option<usize>,
    pub counting: BacktrackCounting,
}

impl BfsnConfig {
    pub fn new(max_hops: usize, max_backtrack: Option<usize>) -> BfsnConfig {
        BfsnConfig {
            max_hops,
            max_backtrack,
            counting: BacktrackCounting::default(),
        }
    }
}

/// A host for the next virtual node plus the substrate paths its links to
/// already-placed neighbors would take.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub host: NodeId,
    /// `(demand link, one path per constituent in commit order)`.
    pub link_plan: Vec<(usize, Vec<Path>)>,
    pub cost: Amount,
}

/// Search state on one sub-substrate.
#[derive(Debug, Clone)]
pub struct EmbedAttempt {
    pub hosts: Vec<Option<NodeId>>,
    pub link_paths: Vec<Option<Vec<Path>>>,
    /// The substrate with this attempt's tentative reservations applied.
    pub working: SubstrateNetwork,
    pub backtracks: usize,
}

impl EmbedAttempt {
    pub fn new(g: &DemandGraph, sn: &SubstrateNetwork) -> EmbedAttempt {
        EmbedAttempt {
            hosts: vec![None; g.node_count()],
            link_paths: vec![None; g.links.len()],
            working: sn.clone(),
            backtracks: 0,
        }
    }

    fn add(&mut self, g: &DemandGraph, v: usize, cand: &Candidate) {
        self.working.take_cpu(cand.host, g.cpu[v]);
        for (l, paths) in &cand.link_plan {
            for (part, path) in g.links[*l].parts.iter().zip(paths) {
                self.working.take_path(path, part.bw);
            }
            self.link_paths[*l] = Some(paths.clone());
        }
        self.hosts[v] = Some(cand.host);
    }

    fn delete(&mut self, g: &DemandGraph, v: usize, cand: &Candidate) {
        for (l, paths) in &cand.link_plan {
            for (part, path) in g.links[*l].parts.iter().zip(paths) {
                self.working.give_path(path, part.bw);
            }
            self.link_paths[*l] = None;
        }
        self.working.give_cpu(cand.host, g.cpu[v]);
        self.hosts[v] = None;
    }
}

/// Hosts for `order.sequence[idx]`, best first.
///
/// The first node may go to any host with enough CPU, richest host first.
/// Later nodes need, for every placed neighbor, a feasible path per
/// constituent from the neighbor's host (an empty one when sharing it); they
/// are sorted by the bandwidth-weighted hop count of those paths.
pub fn candidate_hosts(
    g: &DemandGraph,
    order: &EmbedOrder,
    idx: usize,
    sub: &SubSubstrate,
    attempt: &mut EmbedAttempt,
    max_hops: usize,
) -> Vec<Candidate> {
    let v = order.sequence[idx];
    let demand = g.cpu[v];
    let placed: Vec<(usize, NodeId)> = g
        .neighbors(v)
        .iter()
        .filter_map(|&(u, l)| attempt.hosts[u].map(|h| (l, h)))
        .collect();

    let cpu_ok = |working: &SubstrateNetwork, h: NodeId| working.node(h).cpu_residual >= demand;

    if placed.is_empty() {
        let working = &attempt.working;
        let mut hosts: Vec<(Amount, NodeId)> = sub
            .host_nodes
            .iter()
            .filter(|&&h| cpu_ok(working, h))
            .map(|&h| (working.resources_of(h), h))
            .collect();
        hosts.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        return hosts
            .into_iter()
            .map(|(_, host)| Candidate {
                host,
                link_plan: Vec::new(),
                cost: Amount::ZERO,
            })
            .collect();
    }

    // Reachability prefilter: one tree per placed neighbor, filtered by the
    // link's widest constituent.
    let trees: Vec<ReachTree> = placed
        .iter()
        .map(|&(l, h)| ReachTree::grow(&attempt.working, h, max_hops, g.links[l].widest(), None))
        .collect();

    let mut out = Vec::new();
    for &h in &sub.host_nodes {
        if !cpu_ok(&attempt.working, h) || !trees.iter().all(|t| t.reaches(h)) {
            continue;
        }
        if let Some(cand) = plan_links(g, &placed, &trees, h, &mut attempt.working, max_hops) {
            out.push(cand);
        }
    }
    out.sort_by(|a, b| a.cost.cmp(&b.cost).then(a.host.cmp(&b.host)));
    out
}

/// Commits one path per constituent, reserving as it goes so that siblings
/// sharing a substrate link cannot jointly overcommit it, then undoes the
/// reservations.
fn plan_links(
    g: &DemandGraph,
    placed: &[(usize, NodeId)],
    trees: &[ReachTree],
    h: NodeId,
    working: &mut SubstrateNetwork,
    max_hops: usize,
) -> Option<Candidate> {
    let mut reserved: Vec<(Path, Amount)> = Vec::new();
    let mut plan = Vec::with_capacity(placed.len());
    let mut cost = Amount::ZERO;
    let mut feasible = true;
    'links: for (&(l, from), tree) in placed.iter().zip(trees) {
        let mut paths = Vec::with_capacity(g.links[l].parts.len());
        for part in &g.links[l].parts {
            let path = if reserved.is_empty() && part.bw == g.links[l].widest() {
                tree.path_to(h)
            } else {
                cheapest_feasible_path(working, from, h, max_hops, part.bw)
            };
            let Some(path) = path else {
                feasible = false;
                break 'links;
            };
            cost += part.bw * path.hops();
            if !path.is_empty() {
                working.take_path(&path, part.bw);
                reserved.push((path.clone(), part.bw));
            }
            paths.push(path);
        }
        plan.push((l, paths));
    }
    for (path, bw) in reserved.iter().rev() {
        working.give_path(path, *bw);
    }
    feasible.then_some(Candidate {
        host: h,
        link_plan: plan,
        cost,
    })
}

/// Places `order.sequence[idx..]`. On failure every reservation made by this
/// call has been undone.
pub fn embed_recursive(
    g: &DemandGraph,
    order: &EmbedOrder,
    idx: usize,
    sub: &SubSubstrate,
    attempt: &mut EmbedAttempt,
    cfg: &BfsnConfig,
) -> bool {
    if idx == order.sequence.len() {
        return true;
    }
    let v = order.sequence[idx];
    let over_budget = |count: usize| cfg.max_backtrack.is_some_and(|max| count > max);
    for cand in candidate_hosts(g, order, idx, sub, attempt, cfg.max_hops) {
        attempt.add(g, v, &cand);
        if embed_recursive(g, order, idx + 1, sub, attempt, cfg) {
            return true;
        }
        attempt.delete(g, v, &cand);
        if cfg.counting == BacktrackCounting::EveryDelete {
            attempt.backtracks += 1;
        }
        if over_budget(attempt.backtracks) {
            return false;
        }
    }
    if cfg.counting == BacktrackCounting::Exhaustions {
        attempt.backtracks += 1;
    }
    false
}

/// A finished placement of a demand graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandSolution {
    pub hosts: Vec<NodeId>,
    pub link_paths: Vec<Vec<Path>>,
}

/// Runs the backtracking search for `g` on one sub-substrate of `sn`.
/// Returns the solution (if any) and the backtracks spent.
pub fn embed_on(
    g: &DemandGraph,
    sn: &SubstrateNetwork,
    sub: &SubSubstrate,
    cfg: &BfsnConfig,
) -> (Option<DemandSolution>, usize) {
    let order = order_demand_graph(g);
    let mut attempt = EmbedAttempt::new(g, sn);
    let ok = embed_recursive(g, &order, 0, sub, &mut attempt, cfg);
    let solution = ok.then(|| DemandSolution {
        hosts: attempt.hosts.iter().map(|h| h.expect("all placed")).collect(),
        link_paths: attempt
            .link_paths
            .iter()
            .map(|p| p.clone().expect("all links planned"))
            .collect(),
    });
    (solution, attempt.backtracks)
}

/// Result of one embedding request, with search statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbedOutcome {
    pub mapping: Option<Mapping>,
    pub subnets_tried: usize,
    pub backtracks: usize,
    /// Index into the candidate list of the sub-substrate that succeeded.
    pub subnet_index: Option<usize>,
}

impl EmbedOutcome {
    pub fn rejected(subnets_tried: usize, backtracks: usize) -> EmbedOutcome {
        EmbedOutcome {
            mapping: None,
            subnets_tried,
            backtracks,
            subnet_index: None,
        }
    }
}

/// Embeds `vn` on the first candidate sub-substrate that admits it. The
/// substrate is not modified; apply the mapping with
/// [`SubstrateNetwork::allocate`].
pub fn bfsn_embed(vn: &VirtualNetwork, sn: &SubstrateNetwork, cfg: &BfsnConfig) -> EmbedOutcome {
    let subs = candidate_subnetworks(sn, vn, cfg.max_hops);
    bfsn_embed_on(vn, sn, &subs, cfg)
}

/// As [`bfsn_embed`], over an explicit list of sub-substrates.
pub fn bfsn_embed_on(vn: &VirtualNetwork, sn: &SubstrateNetwork, subs: &[SubSubstrate], cfg: &BfsnConfig) -> EmbedOutcome {
    let g = DemandGraph::from_vn(vn);
    let mut backtracks = 0;
    for (i, sub) in subs.iter().enumerate() {
        let (solution, spent) = embed_on(&g, sn, sub, cfg);
        backtracks += spent;
        if let Some(sol) = solution {
            let links = sol.link_paths.into_iter().map(|mut p| p.remove(0)).collect();
            return EmbedOutcome {
                mapping: Some(Mapping { nodes: sol.hosts, links }),
                subnets_tried: i + 1,
                backtracks,
                subnet_index: Some(i),
            };
        }
    }
    EmbedOutcome::rejected(subs.len(), backtracks)
}

/// Breadth-first levels of an order, for inspection and tests.
pub fn levels(order: &EmbedOrder) -> Vec<Vec<usize>> {
    let mut depth = vec![0usize; order.tree_parent.len()];
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut queue: VecDeque<usize> = order.sequence.iter().copied().collect();
    while let Some(v) = queue.pop_front() {
        depth[v] = order.tree_parent[v].map_or(0, |p| depth[p] + 1);
        if out.len() <= depth[v] {
            out.resize(depth[v] + 1, Vec::new());
        }
        out[depth[v]].push(v);
    }
    out
}
