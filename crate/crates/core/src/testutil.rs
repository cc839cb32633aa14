//! Random instance strategies shared by the property tests.

use proptest::prelude::*;

use crate::amount::Amount;
use crate::graph::{SubstrateNetwork, VirtualNetwork};

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect()
}

/// Arbitrary (possibly disconnected) substrate with whole-unit capacities.
pub fn arb_substrate(max_nodes: usize) -> impl Strategy<Value = SubstrateNetwork> {
    (1..=max_nodes).prop_flat_map(|n| {
        let pairs = all_pairs(n);
        let np = pairs.len();
        (
            proptest::collection::vec(0u32..20, n),
            proptest::collection::vec(proptest::option::weighted(0.45, 1u32..10), np),
        )
            .prop_map(move |(cpu, bws)| {
                let links: Vec<_> = pairs
                    .iter()
                    .zip(bws)
                    .filter_map(|(&(a, b), bw)| bw.map(|bw| (a, b, Amount::from_whole(bw as i64))))
                    .collect();
                let cpu: Vec<_> = cpu.into_iter().map(|c| Amount::from_whole(c as i64)).collect();
                SubstrateNetwork::from_parts(&cpu, &links).unwrap()
            })
    })
}

/// Arbitrary connected virtual network: a random spanning tree plus extra links.
pub fn arb_vn(max_nodes: usize, max_cpu: u32, max_bw: u32) -> impl Strategy<Value = VirtualNetwork> {
    (1..=max_nodes).prop_flat_map(move |n| {
        let pairs = all_pairs(n);
        let np = pairs.len();
        (
            proptest::collection::vec(1..=max_cpu, n),
            proptest::collection::vec(0usize..usize::MAX, n.saturating_sub(1)),
            proptest::collection::vec(proptest::option::weighted(0.3, 1..=max_bw), np),
            proptest::collection::vec(1..=max_bw, n.saturating_sub(1)),
        )
            .prop_map(move |(cpu, parents, extra, tree_bw)| {
                let mut links = Vec::new();
                for (i, (&p, &bw)) in parents.iter().zip(&tree_bw).enumerate() {
                    let child = i + 1;
                    links.push((p % child, child, Amount::from_whole(bw as i64)));
                }
                for (&(a, b), bw) in pairs.iter().zip(extra) {
                    if let Some(bw) = bw {
                        if !links.iter().any(|&(x, y, _)| (x, y) == (a, b)) {
                            links.push((a, b, Amount::from_whole(bw as i64)));
                        }
                    }
                }
                let cpu: Vec<_> = cpu.into_iter().map(|c| Amount::from_whole(c as i64)).collect();
                VirtualNetwork::new(&cpu, &links).unwrap()
            })
    })
}
