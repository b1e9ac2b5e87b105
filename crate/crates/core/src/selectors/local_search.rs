use std::collections::VecDeque;

use super::{best_neighbor, Ranked};
use crate::graph::NodeId;
use crate::metrics::RpInstance;

/// Best-improvement descent over one-hop neighbors, at most `iters` moves.
/// Stops at the first node with no strictly better neighbor.
pub fn local_search_hill_climb(inst: &RpInstance<'_>, start: NodeId, iters: usize) -> NodeId {
    hill_climb(inst, Ranked::of(inst, start), iters).node
}

pub(crate) fn hill_climb(inst: &RpInstance<'_>, start: Ranked, iters: usize) -> Ranked {
    let mut current = start;
    for _ in 0..iters {
        match best_neighbor(inst, current.node, None) {
            Some(next) if next.rank < current.rank => current = next,
            _ => break,
        }
    }
    current
}

/// Tabu walk of `iters` one-hop moves (always moving to the best non-tabu
/// neighbor), followed by a best-improvement descent from the best node
/// seen. The result is never worse than `start`.
pub fn local_search_tabu(inst: &RpInstance<'_>, start: NodeId, iters: usize, tenure: usize) -> NodeId {
    tabu_then_descend(inst, Ranked::of(inst, start), iters, tenure).node
}

pub(crate) fn tabu_then_descend(inst: &RpInstance<'_>, start: Ranked, iters: usize, tenure: usize) -> Ranked {
    let mut current = start;
    let mut best = start;
    let mut tabu = VecDeque::with_capacity(tenure + 1);
    for _ in 0..iters {
        let Some(next) = best_neighbor(inst, current.node, Some(&tabu)) else {
            break;
        };
        tabu.push_back(current.node);
        if tabu.len() > tenure {
            tabu.pop_front();
        }
        current = next;
        if current.rank < best.rank {
            best = current;
        }
    }
    hill_climb(inst, best, iters)
}
