use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{best_neighbor, finish, initial_solution, Ranked, SelectError, SelectionResult, TraceEntry, VnsConfig};
use crate::metrics::RpInstance;

/// Tabu search over one-hop moves.
///
/// Each step moves to the best non-tabu neighbor even when it is worse, and
/// the departed node joins a FIFO tabu list of length `tabu_tenure`. A step
/// with no admissible neighbor is spent in place. The best node seen is
/// returned after `max_total_iters` steps or `max_stable_iters` steps
/// without improving it.
pub fn select_tabu(inst: &RpInstance<'_>, cfg: &VnsConfig) -> Result<SelectionResult, SelectError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let start = Ranked::of(inst, initial_solution(inst, cfg, &mut rng)?);
    let mut current = start;
    let mut best = start;
    let mut tabu: VecDeque<usize> = VecDeque::with_capacity(cfg.tabu_tenure + 1);
    let mut trace = vec![TraceEntry {
        iteration: 0,
        k: 0,
        incumbent: best.node,
        fitness: inst.fitness(best.node),
    }];

    let (mut total, mut stable) = (0, 0);
    while total < cfg.max_total_iters && stable < cfg.max_stable_iters {
        total += 1;
        if let Some(next) = best_neighbor(inst, current.node, Some(&tabu)) {
            tabu.push_back(current.node);
            if tabu.len() > cfg.tabu_tenure {
                tabu.pop_front();
            }
            current = next;
        }
        if current.rank < best.rank {
            best = current;
            stable = 0;
        } else {
            stable += 1;
        }
        trace.push(TraceEntry {
            iteration: total,
            k: 1,
            incumbent: best.node,
            fitness: inst.fitness(best.node),
        });
    }
    finish(inst, best.node, total, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeAttr, Graph};
    use crate::metrics::{MulticastGroup, QosBounds};
    use crate::selectors::InitialSolution;

    #[test]
    fn single_node() {
        let g = Graph::new(1);
        let grp = MulticastGroup::new([0], [0]);
        let inst = RpInstance::new(&g, &grp, QosBounds::unbounded());
        let r = select_tabu(&inst, &VnsConfig::for_size(1)).unwrap();
        assert_eq!(r.rp, 0);
    }

    #[test]
    fn long_tenure_on_cycle_never_revisits() {
        let mut g = Graph::new(4);
        for u in 0..4 {
            g.add_link(u, (u + 1) % 4, EdgeAttr::new(1.0 + u as f64, 1.0), EdgeAttr::new(1.0, 1.0))
                .unwrap();
        }
        let grp = MulticastGroup::new([0], [2]);
        let inst = RpInstance::new(&g, &grp, QosBounds::unbounded());
        let cfg = VnsConfig {
            tabu_tenure: 4,
            max_total_iters: 1000,
            max_stable_iters: 6,
            initial: InitialSolution::Given(0),
            ..VnsConfig::for_size(4)
        };
        let r = select_tabu(&inst, &cfg).unwrap();
        assert!(r.iterations_used < 1000);
        // Only three moves are ever admissible; afterwards steps are spent in place.
        assert!(r.iterations_used <= 3 + cfg.max_stable_iters);
        let best = (0..4).map(|v| inst.fitness(v)).fold(f64::INFINITY, f64::min);
        assert_eq!(r.eval.fitness, best);
    }
}
