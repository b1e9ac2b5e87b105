use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{finish, Candidate, SelectError, SelectionResult, TraceEntry};
use crate::graph::approx_eq;
use crate::metrics::{Infeasible, RpInstance};

/// Evaluates every candidate, keeping those with a buildable tree.
fn evaluate_all(inst: &RpInstance<'_>) -> Result<Vec<Candidate>, SelectError> {
    if inst.candidates().is_empty() {
        return Err(SelectError::NoCandidates);
    }
    let mut last_err = Infeasible::EmptyGroup;
    let out: Vec<Candidate> = inst
        .candidates()
        .iter()
        .filter_map(|&node| match inst.evaluate(node) {
            Ok(eval) => Some(Candidate { node, eval }),
            Err(e) => {
                last_err = e;
                None
            }
        })
        .collect();
    if out.is_empty() {
        Err(SelectError::NoFeasibleTree(last_err))
    } else {
        Ok(out)
    }
}

fn single_step(inst: &RpInstance<'_>, c: Candidate) -> Result<SelectionResult, SelectError> {
    let trace = vec![TraceEntry {
        iteration: 1,
        k: 0,
        incumbent: c.node,
        fitness: c.eval.fitness,
    }];
    finish(inst, c.node, 1, trace)
}

/// Uniform draw over the candidates whose tree can be built.
pub fn select_random(inst: &RpInstance<'_>, seed: u64) -> Result<SelectionResult, SelectError> {
    let all = evaluate_all(inst)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = all[rng.random_range(0..all.len())];
    single_step(inst, pick)
}

fn lower_cost_then_id(a: &Candidate, b: &Candidate) -> Ordering {
    a.eval
        .cost
        .total_cmp(&b.eval.cost)
        .then(a.node.cmp(&b.node))
}

/// Fallback when no candidate meets the delay bound: smallest maximum delay.
fn min_max_delay(all: &[Candidate]) -> Candidate {
    *all.iter()
        .min_by(|a, b| {
            a.eval
                .max_delay
                .total_cmp(&b.eval.max_delay)
                .then_with(|| lower_cost_then_id(a, b))
        })
        .expect("non-empty")
}

/// Among candidates meeting the delay bound, the one with the smallest delay
/// variation; ties by lower cost, then lower id. When none meets the bound
/// the candidate with the smallest maximum delay is returned (and is
/// reported infeasible by its evaluation).
pub fn select_ddvca(inst: &RpInstance<'_>) -> Result<SelectionResult, SelectError> {
    let all = evaluate_all(inst)?;
    let bound = inst.bounds().delay_bound;
    let pick = all
        .iter()
        .filter(|c| c.eval.max_delay <= bound)
        .min_by(|a, b| {
            a.eval
                .delay_variation
                .total_cmp(&b.eval.delay_variation)
                .then_with(|| lower_cost_then_id(a, b))
        })
        .copied()
        .unwrap_or_else(|| min_max_delay(&all));
    single_step(inst, pick)
}

/// DDVCA candidate set (delay-feasible nodes sharing the minimum delay
/// variation, up to the relative tolerance), refined by lowest maximum
/// delay, then cost, then id. Lowest maximum delay stands in for the
/// "potential delay variation" of the original algorithm.
pub fn select_akc(inst: &RpInstance<'_>) -> Result<SelectionResult, SelectError> {
    let all = evaluate_all(inst)?;
    let bound = inst.bounds().delay_bound;
    let feasible: Vec<Candidate> = all
        .iter()
        .filter(|c| c.eval.max_delay <= bound)
        .copied()
        .collect();
    let Some(min_var) = feasible
        .iter()
        .map(|c| c.eval.delay_variation)
        .min_by(f64::total_cmp)
    else {
        return single_step(inst, min_max_delay(&all));
    };
    let pick = feasible
        .iter()
        .filter(|c| approx_eq(c.eval.delay_variation, min_var))
        .min_by(|a, b| {
            a.eval
                .max_delay
                .total_cmp(&b.eval.max_delay)
                .then_with(|| lower_cost_then_id(a, b))
        })
        .copied()
        .expect("minimum is a member");
    single_step(inst, pick)
}
