//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use proptest::prelude::*;
use rpsel::graph::{EdgeAttr, Graph, NodeId};
use rpsel::metrics::{FitnessWeights, MulticastGroup, QosBounds};
use rpsel::topology::{sample_group, waxman_generate, WaxmanParams};

/// Every simple path from `src` to `dst`, by depth-first enumeration.
pub fn simple_paths(g: &Graph, src: NodeId, dst: NodeId) -> Vec<Vec<NodeId>> {
    fn walk(g: &Graph, path: &mut Vec<NodeId>, on: &mut [bool], dst: NodeId, out: &mut Vec<Vec<NodeId>>) {
        let u = *path.last().unwrap();
        if u == dst {
            out.push(path.clone());
            return;
        }
        for (v, _) in g.neighbors(u) {
            if !on[v] {
                on[v] = true;
                path.push(v);
                walk(g, path, on, dst, out);
                path.pop();
                on[v] = false;
            }
        }
    }
    let mut on = vec![false; g.node_count()];
    on[src] = true;
    let mut out = Vec::new();
    walk(g, &mut vec![src], &mut on, dst, &mut out);
    out
}

/// Sums cost and delay hop by hop.
pub fn walk_totals(g: &Graph, nodes: &[NodeId]) -> (f64, f64) {
    nodes.windows(2).fold((0.0, 0.0), |(c, d), w| {
        let a = g.edge(w[0], w[1]).expect("path edge exists");
        (c + a.cost, d + a.delay)
    })
}

fn rel_eq(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Brute-force least-delay path: minimum delay, then cost, then
/// lexicographically smallest node sequence.
pub fn oracle_path(g: &Graph, src: NodeId, dst: NodeId) -> Option<(Vec<NodeId>, f64, f64)> {
    let all = simple_paths(g, src, dst);
    let min_delay = all.iter().map(|p| walk_totals(g, p).1).fold(f64::INFINITY, f64::min);
    let tied: Vec<&Vec<NodeId>> = all.iter().filter(|p| rel_eq(walk_totals(g, p).1, min_delay)).collect();
    let min_cost = tied.iter().map(|p| walk_totals(g, p).0).fold(f64::INFINITY, f64::min);
    let best = tied
        .into_iter()
        .filter(|p| rel_eq(walk_totals(g, p).0, min_cost))
        .min()?
        .clone();
    let (c, d) = walk_totals(g, &best);
    Some((best, c, d))
}

/// Oracle evaluation of RP `rp` from brute-force paths:
/// `(cost, max_delay, min_delay, variation, fitness)`.
pub fn oracle_eval(
    g: &Graph,
    rp: NodeId,
    grp: &MulticastGroup,
    b: &QosBounds,
    w: &FitnessWeights,
) -> Option<(f64, f64, f64, f64, f64)> {
    let mut cost = 0.0;
    let mut up = Vec::new();
    for &s in grp.sources() {
        let (_, c, d) = oracle_path(g, s, rp)?;
        cost += c;
        up.push(d);
    }
    let mut down = Vec::new();
    for &r in grp.receivers() {
        let (_, c, d) = oracle_path(g, rp, r)?;
        cost += c;
        down.push(d);
    }
    let pairs: Vec<f64> = up.iter().flat_map(|u| down.iter().map(move |d| u + d)).collect();
    let max = pairs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = pairs.iter().copied().fold(f64::INFINITY, f64::min);
    let var = max - min;
    let fitness = cost
        + w.penalty * (max - b.delay_bound).max(0.0) / b.delay_bound
        + w.penalty * (var - b.variation_bound).max(0.0) / b.variation_bound;
    Some((cost, max, min, var, fitness))
}

/// Hop distances by breadth-first search, written independently of the library.
pub fn bfs_hops(g: &Graph, s: NodeId) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.node_count()];
    dist[s] = Some(0);
    let mut queue = std::collections::VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        for (v, _) in g.neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(dist[u].unwrap() + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Largest component of a seeded Waxman graph with a sampled group.
pub fn waxman_instance(n: usize, seed: u64, fraction: f64, n_sources: usize) -> (Graph, MulticastGroup) {
    let topo = waxman_generate(&WaxmanParams::new(n, seed)).unwrap();
    let (lcc, _) = topo.largest_component();
    let g = lcc.graph;
    let grp = sample_group(&g, fraction, n_sources.min(g.node_count()), seed.wrapping_add(7)).unwrap();
    (g, grp)
}

/// Like [`waxman_instance`] but retries seeds until the component has at
/// least `min_nodes` nodes.
pub fn waxman_instance_min(n: usize, seed: u64, fraction: f64, n_sources: usize, min_nodes: usize) -> (Graph, MulticastGroup) {
    (0..)
        .map(|k| waxman_instance(n, seed.wrapping_mul(1000).wrapping_add(k), fraction, n_sources))
        .find(|(g, _)| g.node_count() >= min_nodes)
        .unwrap()
}

/// Symmetric-topology graph with small integer weights, so that ties occur.
pub fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        let m = pairs.len();
        (
            Just(n),
            Just(pairs),
            prop::collection::vec(any::<bool>(), m),
            prop::collection::vec((1u8..=4, 0u8..=4, 1u8..=4, 0u8..=4), m),
        )
            .prop_map(|(n, pairs, keep, w)| {
                let mut g = Graph::new(n);
                for ((&(u, v), k), (c1, d1, c2, d2)) in pairs.iter().zip(keep).zip(w) {
                    if k {
                        g.add_link(
                            u,
                            v,
                            EdgeAttr::new(c1 as f64, d1 as f64),
                            EdgeAttr::new(c2 as f64, d2 as f64),
                        )
                        .unwrap();
                    }
                }
                g
            })
    })
}

/// Graph plus a group drawn from its nodes.
pub fn arb_instance(max_n: usize) -> impl Strategy<Value = (Graph, MulticastGroup)> {
    arb_graph(max_n).prop_flat_map(|g| {
        let n = g.node_count();
        (
            Just(g),
            prop::collection::btree_set(0..n, 1..=2.min(n)),
            prop::collection::btree_set(0..n, 1..=n),
        )
            .prop_map(|(g, s, r)| (g, MulticastGroup::new(s, r)))
    })
}

/// Replays a trace step by step with the public session pieces and checks
/// that recovery is forced exactly when the RP died or lost its tree, and
/// that a recovery succeeds whenever some live node can serve the group.
/// Returns the number of forced recoveries.
pub fn check_forced_recovery(
    g0: &Graph,
    grp0: &MulticastGroup,
    trace: &[rpsel::session::SessionEvent],
    setup: &rpsel::session::SessionSetup,
) -> Result<usize, String> {
    use rpsel::metrics::RpInstance;
    use rpsel::selectors::{select, InitialSolution};
    use rpsel::session::{recovery_policy, Decision, SessionState};

    let mut st = SessionState::new(g0, grp0, setup.bounds, setup.weights, 0);
    let mut forced = 0;
    for (i, ev) in trace.iter().enumerate() {
        st.apply_event(ev)?;
        let decision = recovery_policy(&st, ev, &setup.policy);
        let rp_dead = !st.network().is_alive(st.rp());
        let lost = st.group().is_complete() && st.fitness().is_none();
        if rp_dead || lost {
            if decision != (Decision::Reselect { forced: true }) {
                return Err(format!("event {i} ({ev}): expected forced recovery, got {decision:?}"));
            }
            forced += 1;
        } else if decision == (Decision::Reselect { forced: true }) {
            return Err(format!("event {i} ({ev}): forced recovery without cause"));
        }
        let alive: Vec<usize> = st.network().alive_nodes().collect();
        let live = st.live_graph().clone();
        let group = st.group().clone();
        let inst = RpInstance::new(&live, &group, setup.bounds).with_candidates(alive.iter().copied());
        let servable = group.is_complete() && alive.iter().any(|&v| inst.evaluate(v).is_ok());
        if let Decision::Reselect { .. } = decision {
            let mut cfg = setup.search.clone();
            cfg.initial = InitialSolution::Given(st.rp());
            match select(setup.algorithm, &inst, &cfg) {
                Ok(r) => {
                    if !st.network().is_alive(r.rp) {
                        return Err(format!("event {i}: selected dead node {}", r.rp));
                    }
                    st.set_rp(r.rp);
                }
                Err(e) if servable => return Err(format!("event {i}: selector failed on a servable state: {e}")),
                Err(_) => {}
            }
        }
        if servable && st.fitness().is_none() {
            return Err(format!("event {i} ({ev}): servable group left without a tree"));
        }
    }
    Ok(forced)
}
