mod common;

use common::{arb_graph, oracle_path, simple_paths, walk_totals, waxman_instance};
use proptest::prelude::*;
use rpsel::graph::{EdgeAttr, Graph};

#[test]
fn triangle_matches_path_enumeration() {
    let mut g = Graph::new(3);
    g.add_edge(0, 1, EdgeAttr::new(1.0, 1.0)).unwrap();
    g.add_edge(1, 2, EdgeAttr::new(1.0, 1.0)).unwrap();
    g.add_edge(0, 2, EdgeAttr::new(1.0, 3.0)).unwrap();
    let all = simple_paths(&g, 0, 2);
    assert_eq!(all.len(), 2);
    let (nodes, _, delay) = oracle_path(&g, 0, 2).unwrap();
    let p = g.shortest_delay_path(0, 2).unwrap();
    assert_eq!(p.nodes, nodes);
    assert_eq!(p.nodes, vec![0, 1, 2]);
    assert_eq!(p.total_delay, delay);
    assert_eq!(p.total_delay, 2.0);
}

#[test]
fn table_agrees_with_pairwise_queries_on_waxman() {
    for seed in 0..5 {
        let (g, _) = waxman_instance(20, seed, 0.1, 1);
        for s in 0..g.node_count() {
            let t = g.delay_table_from(s);
            for v in 0..g.node_count() {
                match g.shortest_delay_path(s, v) {
                    Some(p) => {
                        assert_eq!(t.delay(v), p.total_delay);
                        assert_eq!(t.path_to(v).unwrap(), p);
                    }
                    None => assert_eq!(t.delay(v), f64::INFINITY),
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn shortest_path_equals_enumeration_oracle(g in arb_graph(7)) {
        for s in 0..g.node_count() {
            for d in 0..g.node_count() {
                let got = g.shortest_delay_path(s, d);
                match oracle_path(&g, s, d) {
                    None => prop_assert!(got.is_none()),
                    Some((nodes, cost, delay)) => {
                        let p = got.expect("reachable per oracle");
                        prop_assert_eq!(p.total_delay, delay);
                        prop_assert_eq!(p.total_cost, cost);
                        prop_assert_eq!(p.nodes, nodes);
                    }
                }
            }
        }
    }

    #[test]
    fn triangle_inequality_of_computed_delays(g in arb_graph(8)) {
        let n = g.node_count();
        let tables: Vec<_> = (0..n).map(|s| g.delay_table_from(s)).collect();
        for u in 0..n {
            for v in 0..n {
                for w in 0..n {
                    let (uv, vw, uw) = (tables[u].delay(v), tables[v].delay(w), tables[u].delay(w));
                    if uv.is_finite() && vw.is_finite() {
                        prop_assert!(uw <= uv + vw + 1e-9 * (uv + vw));
                    }
                }
            }
        }
    }

    #[test]
    fn path_totals_reproduce_by_walking(g in arb_graph(8)) {
        for s in 0..g.node_count() {
            let t = g.delay_table_from(s);
            for v in 0..g.node_count() {
                if let Some(p) = t.path_to(v) {
                    prop_assert_eq!(p.source(), s);
                    prop_assert_eq!(p.target(), v);
                    let (c, d) = walk_totals(&g, &p.nodes);
                    prop_assert_eq!(p.total_cost, c);
                    prop_assert_eq!(p.total_delay, d);
                }
            }
        }
    }

    #[test]
    fn queries_are_deterministic(g in arb_graph(8)) {
        let n = g.node_count();
        for s in 0..n {
            for d in 0..n {
                let a = g.shortest_delay_path(s, d);
                let b = g.clone().shortest_delay_path(s, d);
                prop_assert_eq!(a.map(|p| (p.nodes, p.total_cost.to_bits(), p.total_delay.to_bits())),
                                b.map(|p| (p.nodes, p.total_cost.to_bits(), p.total_delay.to_bits())));
            }
        }
    }

    #[test]
    fn edge_list_round_trips(g in arb_graph(8), scale in 0.001f64..1000.0) {
        let mut h = Graph::new(g.node_count());
        for (u, v, a) in g.edges() {
            h.add_edge(u, v, EdgeAttr::new(a.cost * scale / 7.0, a.delay * scale / 3.0)).unwrap();
        }
        let text = h.to_edge_list();
        let back = Graph::from_edge_list(&text).unwrap();
        prop_assert_eq!(&back, &h);
        prop_assert_eq!(back.to_edge_list(), text);
    }
}
