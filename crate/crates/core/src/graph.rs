//! Substrate and virtual networks, mappings between them, and the residual
//! capacity bookkeeping that every embedding algorithm runs against.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::amount::Amount;

pub type NodeId = usize;
pub type LinkId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate link between {0} and {1}")]
    DuplicateLink(NodeId, NodeId),
    #[error("negative capacity {1} on {0}")]
    NegativeCapacity(String, Amount),
    #[error("non-positive demand {1} on {0}")]
    NonPositiveDemand(String, Amount),
    #[error("virtual network is not connected")]
    Disconnected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstrateNode {
    pub id: NodeId,
    pub cpu_capacity: Amount,
    pub cpu_residual: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstrateLink {
    pub id: LinkId,
    pub ends: (NodeId, NodeId),
    pub bw_capacity: Amount,
    pub bw_residual: Amount,
}

impl SubstrateLink {
    /// The endpoint opposite `n`.
    pub fn other(&self, n: NodeId) -> NodeId {
        if self.ends.0 == n {
            self.ends.1
        } else {
            self.ends.0
        }
    }
}

/// Undirected simple graph with per-node neighbor lists sorted by neighbor id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Adjacency {
    lists: Vec<Vec<(NodeId, LinkId)>>,
}

impl Adjacency {
    fn add_node(&mut self) {
        self.lists.push(Vec::new());
    }

    fn find(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        let list = self.lists.get(a)?;
        list.binary_search_by_key(&b, |&(n, _)| n)
            .ok()
            .map(|i| list[i].1)
    }

    fn add_link(&mut self, a: NodeId, b: NodeId, id: LinkId) -> Result<(), GraphError> {
        let n = self.lists.len();
        if a >= n {
            return Err(GraphError::UnknownNode(a));
        }
        if b >= n {
            return Err(GraphError::UnknownNode(b));
        }
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        if self.find(a, b).is_some() {
            return Err(GraphError::DuplicateLink(a.min(b), a.max(b)));
        }
        for (x, y) in [(a, b), (b, a)] {
            let list = &mut self.lists[x];
            let pos = list.partition_point(|&(m, _)| m < y);
            list.insert(pos, (y, id));
        }
        Ok(())
    }

    fn neighbors(&self, n: NodeId) -> &[(NodeId, LinkId)] {
        &self.lists[n]
    }

    fn is_connected(&self) -> bool {
        let n = self.lists.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = queue.pop_front() {
            for &(y, _) in &self.lists[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    queue.push_back(y);
                }
            }
        }
        count == n
    }
}

/// The physical network whose CPU and bandwidth are rented out.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubstrateNetwork {
    nodes: Vec<SubstrateNode>,
    links: Vec<SubstrateLink>,
    adjacency: Adjacency,
}

impl SubstrateNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a fresh (fully unallocated) substrate from capacities.
    pub fn from_parts(
        cpu: &[Amount],
        links: &[(NodeId, NodeId, Amount)],
    ) -> Result<Self, GraphError> {
        let mut sn = Self::new();
        for &c in cpu {
            sn.add_node(c)?;
        }
        for &(a, b, bw) in links {
            sn.add_link(a, b, bw)?;
        }
        Ok(sn)
    }

    pub fn add_node(&mut self, cpu_capacity: Amount) -> Result<NodeId, GraphError> {
        let id = self.nodes.len();
        if cpu_capacity.is_negative() {
            return Err(GraphError::NegativeCapacity(format!("node {id}"), cpu_capacity));
        }
        self.nodes.push(SubstrateNode {
            id,
            cpu_capacity,
            cpu_residual: cpu_capacity,
        });
        self.adjacency.add_node();
        Ok(id)
    }

    pub fn add_link(&mut self, a: NodeId, b: NodeId, bw_capacity: Amount) -> Result<LinkId, GraphError> {
        let id = self.links.len();
        if bw_capacity.is_negative() {
            return Err(GraphError::NegativeCapacity(format!("link {id}"), bw_capacity));
        }
        self.adjacency.add_link(a, b, id)?;
        self.links.push(SubstrateLink {
            id,
            ends: (a.min(b), a.max(b)),
            bw_capacity,
            bw_residual: bw_capacity,
        });
        Ok(id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> &[SubstrateNode] {
        &self.nodes
    }

    pub fn links(&self) -> &[SubstrateLink] {
        &self.links
    }

    pub fn node(&self, n: NodeId) -> &SubstrateNode {
        &self.nodes[n]
    }

    pub fn link(&self, l: LinkId) -> &SubstrateLink {
        &self.links[l]
    }

    /// `(neighbor, link)` pairs sorted by neighbor id.
    pub fn neighbors(&self, n: NodeId) -> &[(NodeId, LinkId)] {
        self.adjacency.neighbors(n)
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        self.adjacency.find(a, b)
    }

    pub fn is_connected(&self) -> bool {
        self.adjacency.is_connected()
    }

    /// Residual CPU plus the residual bandwidth of every incident link.
    pub fn node_resources(&self, n: NodeId) -> Result<Amount, GraphError> {
        if n >= self.nodes.len() {
            return Err(GraphError::UnknownNode(n));
        }
        Ok(self.resources_of(n))
    }

    pub(crate) fn resources_of(&self, n: NodeId) -> Amount {
        self.nodes[n].cpu_residual
            + self
                .neighbors(n)
                .iter()
                .map(|&(_, l)| self.links[l].bw_residual)
                .sum::<Amount>()
    }

    /// Same topology and capacities with every residual reset to capacity.
    pub fn fresh(&self) -> Self {
        let mut sn = self.clone();
        for n in &mut sn.nodes {
            n.cpu_residual = n.cpu_capacity;
        }
        for l in &mut sn.links {
            l.bw_residual = l.bw_capacity;
        }
        sn
    }

    // Unchecked tentative reservations used inside embedding attempts. Callers
    // guarantee feasibility; the debug assertions catch bookkeeping bugs.

    pub(crate) fn take_cpu(&mut self, n: NodeId, amount: Amount) {
        let node = &mut self.nodes[n];
        node.cpu_residual -= amount;
        debug_assert!(!node.cpu_residual.is_negative());
    }

    pub(crate) fn give_cpu(&mut self, n: NodeId, amount: Amount) {
        let node = &mut self.nodes[n];
        node.cpu_residual += amount;
        debug_assert!(node.cpu_residual <= node.cpu_capacity);
    }

    pub(crate) fn take_path(&mut self, path: &Path, bw: Amount) {
        for &l in &path.links {
            let link = &mut self.links[l];
            link.bw_residual -= bw;
            debug_assert!(!link.bw_residual.is_negative());
        }
    }

    pub(crate) fn give_path(&mut self, path: &Path, bw: Amount) {
        for &l in &path.links {
            let link = &mut self.links[l];
            link.bw_residual += bw;
            debug_assert!(link.bw_residual <= link.bw_capacity);
        }
    }

    /// Reserves the resources `m` needs for `vn`. Leaves the network untouched
    /// when the mapping is malformed or any residual would go negative; hop
    /// limits are not checked here.
    pub fn allocate(&mut self, vn: &VirtualNetwork, m: &Mapping) -> Result<(), AllocError> {
        let report = validate_mapping(self, vn, m, usize::MAX);
        if !report.is_clean() {
            return Err(AllocError::Rejected(report));
        }
        let load = Load::of(vn, m);
        for (&n, &d) in &load.cpu {
            self.nodes[n].cpu_residual -= d;
        }
        for (&l, &d) in &load.bw {
            self.links[l].bw_residual -= d;
        }
        Ok(())
    }

    /// Returns the resources reserved by a previous [`allocate`](Self::allocate)
    /// of the same mapping. Residuals that would exceed capacity are capped and
    /// reported, since that can only follow a double release.
    pub fn release(&mut self, vn: &VirtualNetwork, m: &Mapping) -> Result<(), AccountingError> {
        if let Some(v) = shape_violations(self, vn, m).first() {
            return Err(AccountingError { overflows: vec![v.to_string()] });
        }
        let load = Load::of(vn, m);
        let mut overflows = Vec::new();
        for (&n, &d) in &load.cpu {
            let node = &mut self.nodes[n];
            node.cpu_residual += d;
            if node.cpu_residual > node.cpu_capacity {
                overflows.push(format!("node {n} cpu exceeds capacity by {}", node.cpu_residual - node.cpu_capacity));
                node.cpu_residual = node.cpu_capacity;
            }
        }
        for (&l, &d) in &load.bw {
            let link = &mut self.links[l];
            link.bw_residual += d;
            if link.bw_residual > link.bw_capacity {
                overflows.push(format!("link {l} bandwidth exceeds capacity by {}", link.bw_residual - link.bw_capacity));
                link.bw_residual = link.bw_capacity;
            }
        }
        if overflows.is_empty() {
            Ok(())
        } else {
            Err(AccountingError { overflows })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AllocError {
    #[error("mapping rejected: {0}")]
    Rejected(ValidationReport),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("release accounting error: {}", overflows.join("; "))]
pub struct AccountingError {
    pub overflows: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualNode {
    pub id: NodeId,
    pub cpu_demand: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualLink {
    pub id: LinkId,
    pub ends: (NodeId, NodeId),
    pub bw_demand: Amount,
}

impl VirtualLink {
    pub fn other(&self, n: NodeId) -> NodeId {
        if self.ends.0 == n {
            self.ends.1
        } else {
            self.ends.0
        }
    }
}

/// A requested topology: CPU demands on nodes, bandwidth demands on links.
/// Always connected, every demand strictly positive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VirtualNetwork {
    nodes: Vec<VirtualNode>,
    links: Vec<VirtualLink>,
    adjacency: Adjacency,
}

impl VirtualNetwork {
    pub fn new(cpu: &[Amount], links: &[(NodeId, NodeId, Amount)]) -> Result<Self, GraphError> {
        let mut vn = VirtualNetwork::default();
        for (id, &c) in cpu.iter().enumerate() {
            if c <= Amount::ZERO {
                return Err(GraphError::NonPositiveDemand(format!("virtual node {id}"), c));
            }
            vn.nodes.push(VirtualNode { id, cpu_demand: c });
            vn.adjacency.add_node();
        }
        for (id, &(a, b, bw)) in links.iter().enumerate() {
            if bw <= Amount::ZERO {
                return Err(GraphError::NonPositiveDemand(format!("virtual link {id}"), bw));
            }
            vn.adjacency.add_link(a, b, id)?;
            vn.links.push(VirtualLink {
                id,
                ends: (a.min(b), a.max(b)),
                bw_demand: bw,
            });
        }
        if !vn.adjacency.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(vn)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> &[VirtualNode] {
        &self.nodes
    }

    pub fn links(&self) -> &[VirtualLink] {
        &self.links
    }

    pub fn node(&self, n: NodeId) -> &VirtualNode {
        &self.nodes[n]
    }

    pub fn link(&self, l: LinkId) -> &VirtualLink {
        &self.links[l]
    }

    pub fn neighbors(&self, n: NodeId) -> &[(NodeId, LinkId)] {
        self.adjacency.neighbors(n)
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        self.adjacency.find(a, b)
    }

    /// CPU demand plus the demand of every incident link.
    pub fn node_resources(&self, n: NodeId) -> Result<Amount, GraphError> {
        if n >= self.nodes.len() {
            return Err(GraphError::UnknownNode(n));
        }
        Ok(self.nodes[n].cpu_demand
            + self
                .neighbors(n)
                .iter()
                .map(|&(_, l)| self.links[l].bw_demand)
                .sum::<Amount>())
    }

    pub fn total_cpu(&self) -> Amount {
        self.nodes.iter().map(|n| n.cpu_demand).sum()
    }

    pub fn total_bw(&self) -> Amount {
        self.links.iter().map(|l| l.bw_demand).sum()
    }

    pub fn min_cpu(&self) -> Option<Amount> {
        self.nodes.iter().map(|n| n.cpu_demand).min()
    }

    pub fn min_bw(&self) -> Option<Amount> {
        self.links.iter().map(|l| l.bw_demand).min()
    }
}

/// A virtual network together with its arrival time and lifetime.
#[derive(Debug, Clone, PartialEq)]
pub struct VnRequest {
    pub id: usize,
    pub vn: VirtualNetwork,
    pub arrival: f64,
    pub lifetime: f64,
}

impl VnRequest {
    pub fn departure(&self) -> f64 {
        self.arrival + self.lifetime
    }
}

/// A loop-free substrate path, stored as its node sequence and the links
/// between consecutive nodes. A single node with no links is the empty path
/// used by co-located virtual links.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkId>,
}

impl Path {
    pub fn empty(at: NodeId) -> Path {
        Path {
            nodes: vec![at],
            links: Vec::new(),
        }
    }

    /// Rebuilds the link list from a node sequence.
    pub fn from_nodes(sn: &SubstrateNetwork, nodes: Vec<NodeId>) -> Option<Path> {
        if nodes.is_empty() || nodes.iter().any(|&n| n >= sn.node_count()) {
            return None;
        }
        let links = nodes
            .windows(2)
            .map(|w| sn.link_between(w[0], w[1]))
            .collect::<Option<Vec<_>>>()?;
        Some(Path { nodes, links })
    }

    pub fn hops(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn src(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn dst(&self) -> NodeId {
        *self.nodes.last().expect("path has at least one node")
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.nodes.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{n}")?;
        }
        Ok(())
    }
}

/// Node map plus link map, both indexed by virtual id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mapping {
    pub nodes: Vec<NodeId>,
    pub links: Vec<Path>,
}

impl Mapping {
    /// Virtual links whose endpoints share a host.
    pub fn colocated_links(&self) -> usize {
        self.links.iter().filter(|p| p.is_empty()).count()
    }
}

/// Per-substrate-element totals a mapping reserves.
struct Load {
    cpu: BTreeMap<NodeId, Amount>,
    bw: BTreeMap<LinkId, Amount>,
}

impl Load {
    fn of(vn: &VirtualNetwork, m: &Mapping) -> Load {
        let mut cpu = BTreeMap::new();
        for (v, &host) in m.nodes.iter().enumerate() {
            *cpu.entry(host).or_insert(Amount::ZERO) += vn.node(v).cpu_demand;
        }
        let mut bw = BTreeMap::new();
        for (l, path) in m.links.iter().enumerate() {
            for &sl in &path.links {
                *bw.entry(sl).or_insert(Amount::ZERO) += vn.link(l).bw_demand;
            }
        }
        Load { cpu, bw }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Node or link map does not cover the virtual network.
    Incomplete { mapped_nodes: usize, mapped_links: usize },
    UnknownHost { vnode: NodeId, host: NodeId },
    CpuOvercommit { host: NodeId, demand: Amount, residual: Amount },
    BwOvercommit { link: LinkId, demand: Amount, residual: Amount },
    /// The link sequence does not follow the node sequence through the substrate.
    BrokenPath { vlink: LinkId },
    LoopedPath { vlink: LinkId },
    HopLimit { vlink: LinkId, hops: usize, max_hops: usize },
    EndpointMismatch { vlink: LinkId, expected: (NodeId, NodeId), found: (NodeId, NodeId) },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Incomplete { mapped_nodes, mapped_links } => {
                write!(f, "mapping covers {mapped_nodes} nodes and {mapped_links} links")
            }
            Violation::UnknownHost { vnode, host } => {
                write!(f, "virtual node {vnode} mapped to unknown substrate node {host}")
            }
            Violation::CpuOvercommit { host, demand, residual } => {
                write!(f, "substrate node {host}: cpu demand {demand} exceeds residual {residual}")
            }
            Violation::BwOvercommit { link, demand, residual } => {
                write!(f, "substrate link {link}: bandwidth demand {demand} exceeds residual {residual}")
            }
            Violation::BrokenPath { vlink } => write!(f, "virtual link {vlink}: path is not a substrate walk"),
            Violation::LoopedPath { vlink } => write!(f, "virtual link {vlink}: path revisits a node"),
            Violation::HopLimit { vlink, hops, max_hops } => {
                write!(f, "virtual link {vlink}: {hops} hops exceeds limit {max_hops}")
            }
            Violation::EndpointMismatch { vlink, expected, found } => write!(
                f,
                "virtual link {vlink}: path runs {}-{}, hosts are {}-{}",
                found.0, found.1, expected.0, expected.1
            ),
        }
    }
}

/// All constraint violations of a mapping; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn is_walk(sn: &SubstrateNetwork, path: &Path) -> bool {
    !path.nodes.is_empty()
        && path.nodes.len() == path.links.len() + 1
        && path.nodes.iter().all(|&n| n < sn.node_count())
        && path
            .links
            .iter()
            .zip(path.nodes.windows(2))
            .all(|(&l, w)| sn.link_between(w[0], w[1]) == Some(l))
}

/// Structural problems that make the capacity checks meaningless.
fn shape_violations(sn: &SubstrateNetwork, vn: &VirtualNetwork, m: &Mapping) -> Vec<Violation> {
    if m.nodes.len() != vn.node_count() || m.links.len() != vn.link_count() {
        return vec![Violation::Incomplete {
            mapped_nodes: m.nodes.len(),
            mapped_links: m.links.len(),
        }];
    }
    let mut violations: Vec<Violation> = m
        .nodes
        .iter()
        .enumerate()
        .filter(|&(_, &host)| host >= sn.node_count())
        .map(|(vnode, &host)| Violation::UnknownHost { vnode, host })
        .collect();
    violations.extend(
        m.links
            .iter()
            .enumerate()
            .filter(|(_, p)| !is_walk(sn, p))
            .map(|(vlink, _)| Violation::BrokenPath { vlink }),
    );
    violations
}

/// Checks `m` against the residual state of `sn`: co-located CPU, stacked
/// bandwidth, path shape, loop freedom, hop limit and endpoint consistency.
pub fn validate_mapping(
    sn: &SubstrateNetwork,
    vn: &VirtualNetwork,
    m: &Mapping,
    max_hops: usize,
) -> ValidationReport {
    let mut violations = shape_violations(sn, vn, m);
    if !violations.is_empty() {
        return ValidationReport { violations };
    }

    for (vlink, path) in m.links.iter().enumerate() {
        let link = vn.link(vlink);
        let expected = (m.nodes[link.ends.0], m.nodes[link.ends.1]);
        let found = (path.src(), path.dst());
        if found != expected && (found.1, found.0) != expected {
            violations.push(Violation::EndpointMismatch { vlink, expected, found });
        }
        let mut seen: Vec<NodeId> = path.nodes.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            violations.push(Violation::LoopedPath { vlink });
        }
        if path.hops() > max_hops {
            violations.push(Violation::HopLimit {
                vlink,
                hops: path.hops(),
                max_hops,
            });
        }
    }

    let load = Load::of(vn, m);
    for (&host, &demand) in &load.cpu {
        let residual = sn.node(host).cpu_residual;
        if demand > residual {
            violations.push(Violation::CpuOvercommit { host, demand, residual });
        }
    }
    for (&link, &demand) in &load.bw {
        let residual = sn.link(link).bw_residual;
        if demand > residual {
            violations.push(Violation::BwOvercommit { link, demand, residual });
        }
    }
    ValidationReport { violations }
}

/// Total CPU plus total bandwidth the request asks for.
pub fn revenue(vn: &VirtualNetwork) -> Amount {
    vn.total_cpu() + vn.total_bw()
}

/// Total CPU plus each link's bandwidth weighted by its path length in hops.
pub fn cost(vn: &VirtualNetwork, m: &Mapping) -> Amount {
    vn.total_cpu()
        + vn
            .links()
            .iter()
            .zip(&m.links)
            .map(|(l, p)| l.bw_demand * p.hops())
            .sum::<Amount>()
}
