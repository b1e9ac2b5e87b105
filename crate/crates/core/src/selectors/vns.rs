//! Variable neighborhood search for RP selection.
//!
//! Neighborhood `N_k(S)` is the ball of nodes within `k` hops of the
//! incumbent `S`. One iteration shakes (draws `S'` uniformly from `N_k(S)`),
//! runs the local search from `S'` to obtain `S''`, and either accepts
//! `S''` when it is strictly better (restarting at `k = 1`) or moves on to
//! `k + 1`. A pass ends once `k` exceeds `k_max`; passes repeat until
//! `max_stable_iters` consecutive passes bring no improvement or
//! `max_total_iters` iterations have been spent.
//!
//! The start node is first taken to a local optimum, so the returned RP never
//! has a strictly better one-hop neighbor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::local_search::{hill_climb, tabu_then_descend};
use super::{
    candidate_neighborhood, finish, initial_solution, LocalSearchKind, Ranked, SelectError,
    SelectionResult, TraceEntry, VnsConfig,
};
use crate::metrics::RpInstance;

fn local_search(inst: &RpInstance<'_>, start: Ranked, cfg: &VnsConfig) -> Ranked {
    match cfg.local_search {
        LocalSearchKind::HillClimb => hill_climb(inst, start, cfg.local_search_iters),
        LocalSearchKind::Tabu => tabu_then_descend(inst, start, cfg.local_search_iters, cfg.tabu_tenure),
    }
}

pub fn select_vns(inst: &RpInstance<'_>, cfg: &VnsConfig) -> Result<SelectionResult, SelectError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let start = Ranked::of(inst, initial_solution(inst, cfg, &mut rng)?);
    let mut incumbent = local_search(inst, start, cfg);
    let mut trace = vec![TraceEntry {
        iteration: 0,
        k: 0,
        incumbent: incumbent.node,
        fitness: inst.fitness(incumbent.node),
    }];

    let (mut total, mut stable) = (0, 0);
    while stable < cfg.max_stable_iters && total < cfg.max_total_iters {
        let pass_start = incumbent.rank;
        let mut k = 1;
        while k <= cfg.k_max && total < cfg.max_total_iters {
            let ball = candidate_neighborhood(inst, incumbent.node, k);
            if ball.is_empty() {
                k += 1;
                continue;
            }
            let shaken = Ranked::of(inst, ball[rng.random_range(0..ball.len())]);
            let local = local_search(inst, shaken, cfg);
            total += 1;
            let shaken_k = k;
            if local.rank < incumbent.rank {
                incumbent = local;
                k = 1;
            } else {
                k += 1;
            }
            trace.push(TraceEntry {
                iteration: total,
                k: shaken_k,
                incumbent: incumbent.node,
                fitness: inst.fitness(incumbent.node),
            });
        }
        if incumbent.rank < pass_start {
            stable = 0;
        } else {
            stable += 1;
        }
    }
    finish(inst, incumbent.node, total, trace)
}
