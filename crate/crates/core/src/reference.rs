//! Reference embedders: an exhaustive search for tiny instances, used as the
//! ground truth in tests, and a two-stage greedy baseline.

use thiserror::Error;

use crate::amount::Amount;
use crate::graph::{cost, Mapping, NodeId, Path, SubstrateNetwork, VirtualNetwork};
use crate::pathing::cheapest_feasible_path;

/// Label used wherever the greedy baseline's results are reported.
pub const GREEDY_LABEL: &str = "greedy two-stage (not RW-MaxMatch)";

pub const ORACLE_MAX_VIRTUAL: usize = 6;
pub const ORACLE_MAX_SUBSTRATE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("instance too large for exhaustive search: {virtual_nodes} virtual / {substrate_nodes} substrate nodes")]
pub struct TooLarge {
    pub virtual_nodes: usize,
    pub substrate_nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    /// Stop at the first feasible mapping.
    #[default]
    Feasibility,
    /// Search everything and keep the first mapping of least cost.
    MinCost,
}

/// Every loop-free path of at most `max_hops` hops between two nodes, using
/// only links whose residual covers `bw`. Shortest first, then by node
/// sequence.
fn simple_paths(sn: &SubstrateNetwork, src: NodeId, dst: NodeId, max_hops: usize, bw: Amount) -> Vec<Path> {
    fn walk(
        sn: &SubstrateNetwork,
        dst: NodeId,
        max_hops: usize,
        bw: Amount,
        nodes: &mut Vec<NodeId>,
        links: &mut Vec<usize>,
        out: &mut Vec<Path>,
    ) {
        let last = *nodes.last().unwrap();
        if last == dst {
            out.push(Path { nodes: nodes.clone(), links: links.clone() });
            return;
        }
        if links.len() >= max_hops {
            return;
        }
        for l in sn.links() {
            if l.bw_residual < bw || (l.ends.0 != last && l.ends.1 != last) {
                continue;
            }
            let next = l.other(last);
            if nodes.contains(&next) {
                continue;
            }
            nodes.push(next);
            links.push(l.id);
            walk(sn, dst, max_hops, bw, nodes, links, out);
            nodes.pop();
            links.pop();
        }
    }
    let mut out = Vec::new();
    walk(sn, dst, max_hops, bw, &mut vec![src], &mut Vec::new(), &mut out);
    out.sort_by(|a, b| a.hops().cmp(&b.hops()).then_with(|| a.nodes.cmp(&b.nodes)));
    out
}

struct Search<'a> {
    vn: &'a VirtualNetwork,
    sn: &'a SubstrateNetwork,
    max_hops: usize,
    hosts_allowed: Vec<NodeId>,
    objective: Objective,
    cpu_left: Vec<Amount>,
    bw_left: Vec<Amount>,
    hosts: Vec<NodeId>,
    paths: Vec<Path>,
    best: Option<(Amount, Mapping)>,
    collect: Option<(usize, Vec<Mapping>)>,
}

impl Search<'_> {
    fn done(&self) -> bool {
        match &self.collect {
            Some((limit, found)) => found.len() >= *limit,
            None => self.objective == Objective::Feasibility && self.best.is_some(),
        }
    }

    fn place(&mut self, v: usize) {
        if self.done() {
            return;
        }
        if v == self.vn.node_count() {
            self.route(0);
            return;
        }
        let demand = self.vn.node(v).cpu_demand;
        for i in 0..self.hosts_allowed.len() {
            let h = self.hosts_allowed[i];
            if self.cpu_left[h] < demand {
                continue;
            }
            self.cpu_left[h] -= demand;
            self.hosts.push(h);
            self.place(v + 1);
            self.hosts.pop();
            self.cpu_left[h] += demand;
            if self.done() {
                return;
            }
        }
    }

    fn route(&mut self, l: usize) {
        if self.done() {
            return;
        }
        if l == self.vn.link_count() {
            let m = Mapping { nodes: self.hosts.clone(), links: self.paths.clone() };
            if let Some((_, found)) = &mut self.collect {
                found.push(m);
                return;
            }
            let c = cost(self.vn, &m);
            if self.best.as_ref().is_none_or(|(b, _)| c < *b) {
                self.best = Some((c, m));
            }
            return;
        }
        let link = self.vn.link(l);
        let (a, b) = (self.hosts[link.ends.0], self.hosts[link.ends.1]);
        let choices = if a == b {
            vec![Path::empty(a)]
        } else {
            simple_paths(self.sn, a, b, self.max_hops, link.bw_demand)
        };
        for p in choices {
            if p.links.iter().any(|&s| self.bw_left[s] < link.bw_demand) {
                continue;
            }
            for &s in &p.links {
                self.bw_left[s] -= link.bw_demand;
            }
            self.paths.push(p);
            self.route(l + 1);
            let p = self.paths.pop().unwrap();
            for &s in &p.links {
                self.bw_left[s] += link.bw_demand;
            }
            if self.done() {
                return;
            }
        }
    }
}

fn search<'a>(
    vn: &'a VirtualNetwork,
    sn: &'a SubstrateNetwork,
    max_hops: usize,
    objective: Objective,
    allowed_hosts: Option<&[NodeId]>,
    collect: Option<usize>,
) -> Result<Search<'a>, TooLarge> {
    if vn.node_count() > ORACLE_MAX_VIRTUAL || sn.node_count() > ORACLE_MAX_SUBSTRATE {
        return Err(TooLarge {
            virtual_nodes: vn.node_count(),
            substrate_nodes: sn.node_count(),
        });
    }
    let mut hosts_allowed: Vec<NodeId> = match allowed_hosts {
        Some(h) => h.iter().copied().filter(|&n| n < sn.node_count()).collect(),
        None => (0..sn.node_count()).collect(),
    };
    hosts_allowed.sort_unstable();
    hosts_allowed.dedup();
    let mut s = Search {
        vn,
        sn,
        max_hops,
        hosts_allowed,
        objective,
        cpu_left: sn.nodes().iter().map(|n| n.cpu_residual).collect(),
        bw_left: sn.links().iter().map(|l| l.bw_residual).collect(),
        hosts: Vec::new(),
        paths: Vec::new(),
        best: None,
        collect: collect.map(|limit| (limit, Vec::new())),
    };
    s.place(0);
    Ok(s)
}

/// Exhaustive embedding over every host assignment (co-location allowed) and
/// every combination of loop-free paths, checked jointly against residuals.
/// Assignments are tried in lexicographic order of the host vector, so the
/// result is deterministic. `allowed_hosts` restricts where virtual nodes may
/// go; paths may still relay through any node.
pub fn oracle_embed(
    vn: &VirtualNetwork,
    sn: &SubstrateNetwork,
    max_hops: usize,
    objective: Objective,
    allowed_hosts: Option<&[NodeId]>,
) -> Result<Option<Mapping>, TooLarge> {
    Ok(search(vn, sn, max_hops, objective, allowed_hosts, None)?.best.map(|(_, m)| m))
}

/// Up to `limit` feasible mappings in search order.
pub fn oracle_feasible_set(
    vn: &VirtualNetwork,
    sn: &SubstrateNetwork,
    max_hops: usize,
    allowed_hosts: Option<&[NodeId]>,
    limit: usize,
) -> Result<Vec<Mapping>, TooLarge> {
    let s = search(vn, sn, max_hops, Objective::Feasibility, allowed_hosts, Some(limit))?;
    Ok(s.collect.map(|(_, found)| found).unwrap_or_default())
}

/// Two uncoordinated stages: biggest virtual node first onto the richest
/// substrate node with room (one virtual node per host), then each virtual
/// link onto its minimum-hop feasible path.
pub fn greedy_embed(vn: &VirtualNetwork, sn: &SubstrateNetwork, max_hops: usize) -> Option<Mapping> {
    let mut vorder: Vec<NodeId> = (0..vn.node_count()).collect();
    vorder.sort_by(|&a, &b| vn.node(b).cpu_demand.cmp(&vn.node(a).cpu_demand).then(a.cmp(&b)));
    let mut sorder: Vec<(Amount, NodeId)> = (0..sn.node_count()).map(|n| (sn.resources_of(n), n)).collect();
    sorder.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut used = vec![false; sn.node_count()];
    let mut hosts = vec![usize::MAX; vn.node_count()];
    for v in vorder {
        let demand = vn.node(v).cpu_demand;
        let &(_, h) = sorder
            .iter()
            .find(|&&(_, n)| !used[n] && sn.node(n).cpu_residual >= demand)?;
        used[h] = true;
        hosts[v] = h;
    }

    let mut working = sn.clone();
    let mut links = Vec::with_capacity(vn.link_count());
    for l in vn.links() {
        let p = cheapest_feasible_path(&working, hosts[l.ends.0], hosts[l.ends.1], max_hops, l.bw_demand)?;
        working.take_path(&p, l.bw_demand);
        links.push(p);
    }
    Some(Mapping { nodes: hosts, links })
}
