//! Hop-bounded, bandwidth-filtered path queries over substrate residuals.
//!
//! Breadth-first search with neighbor lists visited in ascending id order
//! yields, for every reached node, the minimum-hop path whose node sequence
//! is lexicographically smallest among all minimum-hop paths: nodes at each
//! level are dequeued in lexicographic order of their own paths, and a node
//! keeps the first parent that discovers it.

use std::collections::VecDeque;

use thiserror::Error;

use crate::amount::Amount;
use crate::graph::{LinkId, NodeId, Path, SubstrateNetwork};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("unknown root node {0}")]
    UnknownRoot(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachabilityEntry {
    pub node: NodeId,
    pub best_path: Path,
}

const UNREACHED: u32 = u32::MAX;

/// A breadth-first tree rooted at one substrate node.
#[derive(Debug, Clone)]
pub struct ReachTree {
    root: NodeId,
    depth: Vec<u32>,
    parent: Vec<(NodeId, LinkId)>,
    order: Vec<NodeId>,
}

impl ReachTree {
    /// Grows the tree over links with `bw_residual >= min_bw`, at most
    /// `max_hops` deep. Stops early once `target` is reached.
    pub(crate) fn grow(
        sn: &SubstrateNetwork,
        root: NodeId,
        max_hops: usize,
        min_bw: Amount,
        target: Option<NodeId>,
    ) -> ReachTree {
        let n = sn.node_count();
        let mut depth = vec![UNREACHED; n];
        let mut parent = vec![(usize::MAX, usize::MAX); n];
        let mut order = vec![root];
        depth[root] = 0;
        let mut queue = VecDeque::from([root]);
        let limit = max_hops.min(u32::MAX as usize - 1) as u32;
        'search: while let Some(x) = queue.pop_front() {
            if Some(x) == target || depth[x] >= limit {
                continue;
            }
            for &(y, l) in sn.neighbors(x) {
                if depth[y] != UNREACHED || sn.link(l).bw_residual < min_bw {
                    continue;
                }
                depth[y] = depth[x] + 1;
                parent[y] = (x, l);
                order.push(y);
                if Some(y) == target {
                    break 'search;
                }
                queue.push_back(y);
            }
        }
        ReachTree {
            root,
            depth,
            parent,
            order,
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn reaches(&self, n: NodeId) -> bool {
        self.depth.get(n).is_some_and(|&d| d != UNREACHED)
    }

    pub fn hops(&self, n: NodeId) -> Option<usize> {
        self.reaches(n).then(|| self.depth[n] as usize)
    }

    /// Reached nodes in discovery order, root first.
    pub fn reached(&self) -> &[NodeId] {
        &self.order
    }

    pub fn path_to(&self, n: NodeId) -> Option<Path> {
        if !self.reaches(n) {
            return None;
        }
        let len = self.depth[n] as usize;
        let mut nodes = vec![0; len + 1];
        let mut links = vec![0; len];
        let mut cur = n;
        for i in (0..len).rev() {
            nodes[i + 1] = cur;
            let (p, l) = self.parent[cur];
            links[i] = l;
            cur = p;
        }
        nodes[0] = cur;
        debug_assert_eq!(cur, self.root);
        Some(Path { nodes, links })
    }
}

/// Every node reachable from `root` within `max_hops` over links with at least
/// `min_bw` residual bandwidth, each with its minimum-hop path. The root is
/// included with an empty path. Entries come in discovery order.
pub fn bfs_reachable(
    sn: &SubstrateNetwork,
    root: NodeId,
    max_hops: usize,
    min_bw: Amount,
) -> Result<Vec<ReachabilityEntry>, PathError> {
    if root >= sn.node_count() {
        return Err(PathError::UnknownRoot(root));
    }
    let tree = ReachTree::grow(sn, root, max_hops, min_bw, None);
    Ok(tree
        .reached()
        .iter()
        .map(|&node| ReachabilityEntry {
            node,
            best_path: tree.path_to(node).expect("reached node has a path"),
        })
        .collect())
}

/// Minimum-hop path from `src` to `dst` whose every link has at least `bw`
/// residual bandwidth and whose length is at most `max_hops`. `src == dst`
/// yields the empty path.
pub fn cheapest_feasible_path(
    sn: &SubstrateNetwork,
    src: NodeId,
    dst: NodeId,
    max_hops: usize,
    bw: Amount,
) -> Option<Path> {
    if src >= sn.node_count() || dst >= sn.node_count() {
        return None;
    }
    if src == dst {
        return Some(Path::empty(src));
    }
    ReachTree::grow(sn, src, max_hops, bw, Some(dst)).path_to(dst)
}

pub fn path_exists(sn: &SubstrateNetwork, src: NodeId, dst: NodeId, max_hops: usize, bw: Amount) -> bool {
    cheapest_feasible_path(sn, src, dst, max_hops, bw).is_some()
}
