//! Rendezvous point selection algorithms.
//!
//! All selectors operate on an [`RpInstance`] and return a
//! [`SelectionResult`]: the chosen RP, its evaluation and an anytime trace
//! of the incumbent. Only candidates whose shared tree can be built are ever
//! returned.
//!
//! - [`select_random`]: uniform draw.
//! - [`select_ddvca`]: exhaustive minimum delay variation under the delay bound.
//! - [`select_akc`]: DDVCA candidate set refined by lowest maximum delay.
//! - [`select_tabu`]: tabu walk over one-hop moves.
//! - [`select_vns`]: variable neighborhood search with shaking over nested
//!   hop-distance balls and a pluggable local search.

mod baseline;
mod local_search;
mod tabu;
mod vns;

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, NodeId};
use crate::metrics::{Infeasible, Rank, RpInstance, TreeEvaluation};

pub use baseline::{select_akc, select_ddvca, select_random};
pub use local_search::{local_search_hill_climb, local_search_tabu};
pub use tabu::select_tabu;
pub use vns::select_vns;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SelectError {
    #[error("no eligible rendezvous point candidates")]
    NoCandidates,
    #[error("no candidate can build a shared tree: {0}")]
    NoFeasibleTree(Infeasible),
    #[error("invalid selector configuration: {0}")]
    InvalidConfig(String),
}

/// The selector zoo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "ddvca")]
    Ddvca,
    #[serde(rename = "akc-variant")]
    AkcVariant,
    #[serde(rename = "tabu")]
    Tabu,
    #[serde(rename = "vns")]
    Vns,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Random,
        Algorithm::Ddvca,
        Algorithm::AkcVariant,
        Algorithm::Tabu,
        Algorithm::Vns,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Random => "random",
            Algorithm::Ddvca => "ddvca",
            Algorithm::AkcVariant => "akc-variant",
            Algorithm::Tabu => "tabu",
            Algorithm::Vns => "vns",
        }
    }

    /// Whether the selector honors [`VnsConfig::initial`] as a warm start.
    pub fn warm_starts(self) -> bool {
        matches!(self, Algorithm::Tabu | Algorithm::Vns)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s || (s == "akc" && *a == Algorithm::AkcVariant))
            .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalSearchKind {
    #[default]
    HillClimb,
    Tabu,
}

/// Starting RP for the search-based selectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSolution {
    /// Candidate with the largest keyed hash of its id, mimicking the
    /// hash-based group-to-RP mapping of a bootstrap router.
    #[default]
    BootstrapHash,
    Random,
    /// A given node; falls back to the bootstrap hash when it is not an
    /// eligible candidate.
    Given(NodeId),
}

/// Tunables of the search-based selectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VnsConfig {
    pub k_max: usize,
    pub max_total_iters: usize,
    pub max_stable_iters: usize,
    pub local_search: LocalSearchKind,
    pub local_search_iters: usize,
    pub tabu_tenure: usize,
    pub rng_seed: u64,
    pub initial: InitialSolution,
}

impl VnsConfig {
    /// Defaults for a graph with `n` nodes.
    pub fn for_size(n: usize) -> Self {
        let log2 = (n.max(2) as f64).log2().ceil() as usize;
        Self {
            k_max: 4,
            max_total_iters: 100 * log2,
            max_stable_iters: 10,
            local_search: LocalSearchKind::HillClimb,
            local_search_iters: n.max(1),
            tabu_tenure: 7,
            rng_seed: 0,
            initial: InitialSolution::BootstrapHash,
        }
    }

    pub fn validate(&self) -> Result<(), SelectError> {
        let fields = [
            ("k_max", self.k_max),
            ("max_total_iters", self.max_total_iters),
            ("max_stable_iters", self.max_stable_iters),
            ("local_search_iters", self.local_search_iters),
            ("tabu_tenure", self.tabu_tenure),
        ];
        match fields.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(SelectError::InvalidConfig(format!("{name} must be >= 1"))),
            None => Ok(()),
        }
    }
}

/// A node together with its evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub node: NodeId,
    pub eval: TreeEvaluation,
}

/// One row of the anytime trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub k: usize,
    pub incumbent: NodeId,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub rp: NodeId,
    pub eval: TreeEvaluation,
    pub iterations_used: usize,
    pub trace: Vec<TraceEntry>,
}

impl SelectionResult {
    /// `iter,k,incumbent,fitness` rows with a header.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,k,incumbent,fitness\n");
        for t in &self.trace {
            out.push_str(&format!("{},{},{},{}\n", t.iteration, t.k, t.incumbent, t.fitness));
        }
        out
    }
}

/// Runs `algo` on `inst`. The random selector draws with `cfg.rng_seed`.
pub fn select(algo: Algorithm, inst: &RpInstance<'_>, cfg: &VnsConfig) -> Result<SelectionResult, SelectError> {
    match algo {
        Algorithm::Random => select_random(inst, cfg.rng_seed),
        Algorithm::Ddvca => select_ddvca(inst),
        Algorithm::AkcVariant => select_akc(inst),
        Algorithm::Tabu => select_tabu(inst, cfg),
        Algorithm::Vns => select_vns(inst, cfg),
    }
}

/// Nodes within `1..=j` hops of `s` over out-edges, ascending, excluding `s`.
///
/// `N_1(s)` is the neighbor set of `s` and `N_j(s)` extends `N_{j-1}(s)` with
/// the neighbors of its members, so the result is the hop ball of radius `j`.
pub fn neighborhood(g: &Graph, s: NodeId, j: usize) -> Vec<NodeId> {
    let n = g.node_count();
    let mut seen = vec![false; n];
    seen[s] = true;
    let mut frontier = vec![s];
    let mut out = Vec::new();
    for _ in 0..j {
        let mut next = Vec::new();
        for &x in &frontier {
            for (y, _) in g.neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    next.push(y);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        out.extend_from_slice(&next);
        frontier = next;
    }
    out.sort_unstable();
    out
}

/// [`neighborhood`] restricted to eligible candidates.
pub(crate) fn candidate_neighborhood(inst: &RpInstance<'_>, s: NodeId, j: usize) -> Vec<NodeId> {
    let mut nb = neighborhood(inst.graph(), s, j);
    nb.retain(|&v| inst.is_candidate(v));
    nb
}

/// Keyed 64-bit hash of a node id.
pub fn bootstrap_hash(seed: u64, node: NodeId) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node as u64);
    rng.next_u64()
}

pub(crate) fn bootstrap_rp(inst: &RpInstance<'_>, seed: u64) -> Option<NodeId> {
    inst.candidates()
        .iter()
        .copied()
        .max_by_key(|&v| (bootstrap_hash(seed, v), std::cmp::Reverse(v)))
}

pub(crate) fn initial_solution<R: rand::Rng>(
    inst: &RpInstance<'_>,
    cfg: &VnsConfig,
    rng: &mut R,
) -> Result<NodeId, SelectError> {
    if inst.candidates().is_empty() {
        return Err(SelectError::NoCandidates);
    }
    let node = match cfg.initial {
        InitialSolution::Given(v) if inst.is_candidate(v) => v,
        InitialSolution::Given(_) | InitialSolution::BootstrapHash => {
            bootstrap_rp(inst, cfg.rng_seed).expect("non-empty candidates")
        }
        InitialSolution::Random => {
            let c = inst.candidates();
            c[rng.random_range(0..c.len())]
        }
    };
    if inst.evaluate(node).is_ok() {
        return Ok(node);
    }
    // An unbuildable start traps the search; use the best-hashed buildable node.
    let mut last_err = None;
    inst.candidates()
        .iter()
        .copied()
        .filter(|&v| match inst.evaluate(v) {
            Ok(_) => true,
            Err(e) => {
                last_err = Some(e);
                false
            }
        })
        .max_by_key(|&v| (bootstrap_hash(cfg.rng_seed, v), std::cmp::Reverse(v)))
        .ok_or_else(|| SelectError::NoFeasibleTree(last_err.expect("candidates are non-empty")))
}

/// Node with its search rank, cached to avoid re-evaluation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Ranked {
    pub node: NodeId,
    pub rank: Rank,
}

impl Ranked {
    pub fn of(inst: &RpInstance<'_>, node: NodeId) -> Self {
        Self {
            node,
            rank: inst.rank(node),
        }
    }
}

/// Best candidate in the one-hop neighborhood of `node` that is not tabu.
/// Ties go to the lower id.
pub(crate) fn best_neighbor(
    inst: &RpInstance<'_>,
    node: NodeId,
    tabu: Option<&VecDeque<NodeId>>,
) -> Option<Ranked> {
    candidate_neighborhood(inst, node, 1)
        .into_iter()
        .filter(|v| tabu.is_none_or(|t| !t.contains(v)))
        .map(|v| Ranked::of(inst, v))
        .fold(None, |best: Option<Ranked>, c| match best {
            Some(b) if c.rank.partial_cmp(&b.rank) != Some(Ordering::Less) => Some(b),
            _ => Some(c),
        })
}

pub(crate) fn finish(
    inst: &RpInstance<'_>,
    rp: NodeId,
    iterations_used: usize,
    trace: Vec<TraceEntry>,
) -> Result<SelectionResult, SelectError> {
    let eval = inst.evaluate(rp).map_err(SelectError::NoFeasibleTree)?;
    Ok(SelectionResult {
        rp,
        eval,
        iterations_used,
        trace,
    })
}
