//! The ten-node worked example: a three-node request with one heavy
//! triangle, two candidate pockets, and a final placement that stacks two
//! virtual nodes on one host.

use vne_core::bfsn::{
    bfsn_embed, build_embed_order, candidate_hosts, levels, BfsnConfig, DemandGraph, EmbedAttempt,
};
use vne_core::graph::{cost, validate_mapping, Mapping, SubstrateNetwork, VirtualNetwork};
use vne_core::reference::{oracle_embed, Objective};
use vne_core::subgraph::{candidate_subnetworks, total_available_resources};
use vne_core::Amount;

const NODES: &str = "ABCDEFGHIJ";

fn id(name: char) -> usize {
    NODES.find(name).unwrap()
}

fn w(x: i64) -> Amount {
    Amount::from_whole(x)
}

fn substrate() -> SubstrateNetwork {
    let cpu = [50, 10, 45, 45, 45, 50, 70, 45, 10, 45].map(w);
    let links: Vec<_> = [
        ("AF", 25),
        ("GF", 60),
        ("GB", 25),
        ("BA", 25),
        ("BC", 5),
        ("CH", 60),
        ("HD", 60),
        ("DC", 60),
        ("DE", 60),
        ("EJ", 60),
        ("JI", 60),
        ("IH", 60),
    ]
    .iter()
    .map(|(ends, bw)| {
        let mut c = ends.chars();
        (id(c.next().unwrap()), id(c.next().unwrap()), w(*bw))
    })
    .collect();
    SubstrateNetwork::from_parts(&cpu, &links).unwrap()
}

// a, b, c = 0, 1, 2
fn request() -> VirtualNetwork {
    VirtualNetwork::new(&[w(25), w(40), w(20)], &[(0, 1, w(20)), (1, 2, w(20)), (2, 0, w(30))]).unwrap()
}

fn names(hosts: &[usize]) -> String {
    hosts.iter().map(|&h| NODES.as_bytes()[h] as char).collect()
}

#[test]
fn order_starts_at_the_richest_node() {
    let order = build_embed_order(&request());
    assert_eq!(order.sequence, vec![1, 0, 2]);
    assert_eq!(levels(&order), vec![vec![1], vec![0, 2]]);
}

#[test]
fn two_pockets_smallest_first() {
    let sn = substrate();
    let subs = candidate_subnetworks(&sn, &request(), 2);
    let pockets: Vec<String> = subs.iter().map(|s| names(&s.host_nodes)).collect();
    assert_eq!(pockets, vec!["AFG", "CDEHJ"]);
    let totals: Vec<Amount> = subs.iter().map(|s| total_available_resources(s, &sn)).collect();
    assert_eq!(totals, vec![w(340), w(825)]);
}

#[test]
fn candidate_lists_in_the_first_pocket() {
    let sn = substrate();
    let vn = request();
    let sub = candidate_subnetworks(&sn, &vn, 2).remove(0);
    let g = DemandGraph::from_vn(&vn);
    let order = build_embed_order(&vn);
    let mut attempt = EmbedAttempt::new(&g, &sn);

    let root = candidate_hosts(&g, &order, 0, &sub, &mut attempt, 2);
    assert_eq!(names(&root.iter().map(|c| c.host).collect::<Vec<_>>()), "GFA");

    // place b on G
    let b_only = VirtualNetwork::new(&[w(40)], &[]).unwrap();
    attempt
        .working
        .allocate(&b_only, &Mapping { nodes: vec![id('G')], links: vec![] })
        .unwrap();
    attempt.hosts[1] = Some(id('G'));

    let second = candidate_hosts(&g, &order, 1, &sub, &mut attempt, 2);
    assert_eq!(names(&second.iter().map(|c| c.host).collect::<Vec<_>>()), "GFA");
    assert_eq!(second.iter().map(|c| c.cost).collect::<Vec<_>>(), vec![w(0), w(20), w(40)]);
}

#[test]
fn stacks_a_with_b_and_sends_c_next_door() {
    let sn = substrate();
    let vn = request();
    let out = bfsn_embed(&vn, &sn, &BfsnConfig::new(2, Some(9)));
    assert_eq!(out.subnet_index, Some(0));
    let m = out.mapping.unwrap();
    assert_eq!(names(&m.nodes), "GGF");
    assert!(m.links[0].is_empty());
    assert_eq!(cost(&vn, &m), w(135));
    assert!(validate_mapping(&sn, &vn, &m, 2).is_clean());
}

#[test]
fn exhaustive_search_agrees_both_pockets_are_feasible() {
    let sn = substrate();
    let vn = request();
    for sub in candidate_subnetworks(&sn, &vn, 2) {
        let m = oracle_embed(&vn, &sn, 2, Objective::Feasibility, Some(&sub.host_nodes)).unwrap();
        assert!(m.is_some(), "pocket {}", names(&sub.host_nodes));
    }
}
