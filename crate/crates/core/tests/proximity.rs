mod common;

use std::collections::{BTreeSet, VecDeque};

use common::*;
use eai_core::ingest::ListRole;
use eai_core::proximity::{compute_distances_threaded, ProximityError};
use eai_core::{build_graph, compute_distances, AddressList, Distance, EdgeThreshold};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn no_exclusions() -> AddressList {
    AddressList::new(ListRole::Exclusion)
}

#[test]
fn chain_fixture_matches_path_enumeration() {
    let records = load_transfers("chain8.csv");
    let g = build_graph(&records, EdgeThreshold::default(), false).unwrap();
    let ex = load_list("chain8_exchanges.txt", ListRole::Exchange);
    let dm = compute_distances(&g, &ex, &no_exclusions(), 5).unwrap();

    let edges: BTreeSet<_> = aggregate_edges(&records, EdgeThreshold::default().0, false).into_keys().collect();
    let oracle = enumerate_paths_distances(&edges, &ex.members, 5);
    for (addr, d) in dm.iter() {
        let expected = oracle.get(&addr).map_or(Distance::Beyond, |&h| Distance::Hops(h as u8));
        assert_eq!(d, expected, "{addr}");
    }

    let n = chain8();
    let expect = [
        (n.e, Distance::Hops(0)),
        (n.a, Distance::Hops(1)),
        (n.b, Distance::Hops(2)),
        (n.c, Distance::Hops(3)),
        (n.d, Distance::Hops(4)),
        (n.f, Distance::Hops(5)),
        (n.g, Distance::Beyond),
        (n.x, Distance::Beyond),
    ];
    for (a, d) in expect {
        assert_eq!(dm.distance(&a).unwrap(), d);
    }
}

#[test]
fn chain_fixture_classification() {
    let records = load_transfers("chain8.csv");
    let g = build_graph(&records, EdgeThreshold::default(), false).unwrap();
    let ex = load_list("chain8_exchanges.txt", ListRole::Exchange);
    let dm = compute_distances(&g, &ex, &no_exclusions(), 5).unwrap();
    let n = chain8();

    assert!(dm.is_eai(&n.a).unwrap());
    assert!(!dm.is_eai(&n.b).unwrap());
    assert!(dm.is_eai(&n.e).unwrap());

    assert!(dm.within_hops_of_eai(&n.b, 1).unwrap());
    assert!(!dm.within_hops_of_eai(&n.c, 1).unwrap());
    assert!(dm.within_hops_of_eai(&n.a, 0).unwrap());
    assert!(dm.within_hops_of_eai(&n.e, 0).unwrap());
    assert!(!dm.within_hops_of_eai(&n.g, 100).unwrap());

    assert_eq!(dm.txn_distance(&n.a, &n.b).unwrap(), Distance::Hops(1));
    assert_eq!(dm.txn_distance(&n.f, &n.g).unwrap(), Distance::Hops(5));
    assert_eq!(dm.txn_distance(&n.g, &n.x).unwrap(), Distance::Beyond);

    assert!(dm.txn_is_eai(&n.a, &n.b).unwrap());
    assert!(!dm.txn_is_eai(&n.b, &n.c).unwrap());
    assert!(dm.txn_is_eai(&n.e, &n.g).unwrap());
}

#[test]
fn excluding_the_only_exchange_leaves_no_sources() {
    let records = load_transfers("chain8.csv");
    let g = build_graph(&records, EdgeThreshold::default(), false).unwrap();
    let ex = load_list("chain8_exchanges.txt", ListRole::Exchange);
    let excl = AddressList::from_addresses(ListRole::Exclusion, [chain8().e]);
    assert_eq!(compute_distances(&g, &ex, &excl, 5).unwrap_err(), ProximityError::NoSources);
}

#[test]
fn sending_to_an_exchange_is_not_proximity() {
    let records = load_transfers("chain8.csv");
    let g = build_graph(&records, EdgeThreshold::default(), false).unwrap();
    let ex = load_list("chain8_exchanges.txt", ListRole::Exchange);
    let dm = compute_distances(&g, &ex, &no_exclusions(), 5).unwrap();
    let n = chain8();
    assert_eq!(dm.distance(&n.x).unwrap(), Distance::Beyond);

    // Undirected BFS over the same graph reaches X in one hop.
    let e = g.id_of(&n.e).unwrap();
    let mut dist = vec![usize::MAX; g.node_count()];
    dist[e] = 0;
    let mut q = VecDeque::from([e]);
    while let Some(u) = q.pop_front() {
        let around: Vec<usize> = g.neighbors(u).unwrap().chain(g.predecessors(u).unwrap().iter().copied()).collect();
        for v in around {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
    }
    assert_eq!(dist[g.id_of(&n.x).unwrap()], 1);
}

#[test]
fn distance_csv_uses_cap_label() {
    let records = load_transfers("chain8.csv");
    let g = build_graph(&records, EdgeThreshold::default(), false).unwrap();
    let ex = load_list("chain8_exchanges.txt", ListRole::Exchange);
    let dm = compute_distances(&g, &ex, &no_exclusions(), 5).unwrap();
    let mut out = Vec::new();
    dm.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let n = chain8();
    assert!(text.starts_with("address,distance\n"));
    assert!(text.contains(&format!("{},5\n", n.f)));
    assert!(text.contains(&format!("{},5+\n", n.g)));
}

#[test]
fn random_graphs_match_per_source_bfs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xEA1);
    for round in 0..200 {
        let sg = SimpleGraph::random(&mut rng, 500, 3000);
        let k = rand::Rng::gen_range(&mut rng, 1..=5usize.min(sg.n));
        let sources: Vec<usize> = rand::seq::index::sample(&mut rng, sg.n, k).into_vec();
        let g = build_graph(&records_for(&sg), EdgeThreshold::default(), false).unwrap();
        let ex = AddressList::from_addresses(ListRole::Exchange, sources.iter().map(|&s| node_addr(s)));
        let dm = compute_distances(&g, &ex, &no_exclusions(), 5).unwrap();
        let oracle = sg.per_source_bfs(&sources, 5);
        for (i, want) in oracle.iter().enumerate() {
            let got = dm.distance(&node_addr(i)).unwrap();
            let want = want.map_or(Distance::Beyond, |h| Distance::Hops(h as u8));
            assert_eq!(got, want, "round {round} node {i}");
        }
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let sg = SimpleGraph::random(&mut rng, 3000, 20_000);
        let g = build_graph(&records_for(&sg), EdgeThreshold::default(), false).unwrap();
        let ex = AddressList::from_addresses(ListRole::Exchange, (0..3).map(node_addr));
        let one = compute_distances_threaded(&g, &ex, &no_exclusions(), 5, 1).unwrap();
        for threads in [2, 4, 8] {
            assert_eq!(compute_distances_threaded(&g, &ex, &no_exclusions(), 5, threads).unwrap(), one);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_step_along_an_edge_adds_at_most_one(
        edges in prop::collection::vec((0usize..40, 0usize..40), 0..200),
        max_hops in 1u32..8,
    ) {
        let records: Vec<_> = edges.iter().map(|&(u, v)| transfer(node_addr(u), node_addr(v), 50)).collect();
        let mut records = records;
        records.push(transfer(node_addr(0), node_addr(0), 1));
        let g = build_graph(&records, EdgeThreshold::default(), false).unwrap();
        let ex = AddressList::from_addresses(ListRole::Exchange, [node_addr(0)]);
        let dm = compute_distances(&g, &ex, &no_exclusions(), max_hops).unwrap();
        for (u, v, _) in g.edges() {
            if let Distance::Hops(du) = dm.by_id(u) {
                if u32::from(du) < max_hops {
                    prop_assert!(dm.by_id(v) <= Distance::Hops(du + 1));
                }
            }
        }
        // Every finite distance is witnessed by a predecessor one level closer.
        for v in 0..g.node_count() {
            if let Distance::Hops(h) = dm.by_id(v) {
                if h > 0 {
                    prop_assert!(g.predecessors(v).unwrap().iter().any(|&p| dm.by_id(p) == Distance::Hops(h - 1)));
                } else {
                    prop_assert!(ex.contains(&g.address(v).unwrap()));
                }
            }
        }
    }
}
