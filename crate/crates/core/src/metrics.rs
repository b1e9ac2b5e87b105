//! Shared-tree construction and evaluation.
//!
//! Sources reach the rendezvous point (RP) over their least-delay unicast
//! path; the RP reaches every receiver over its least-delay path. The tree
//! is scored by its cost, the extreme end-to-end delays over
//! (source, receiver) pairs, their spread (delay variation) and a penalized
//! fitness that folds the delay and variation bounds into one number.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DelayTable, Graph, GraphError, NodeId, Path};

/// Role of a group member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Receiver,
}

/// Why a tree rooted at some RP cannot be built or scored.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Infeasible {
    #[error("{role:?} {member} cannot reach the rendezvous point {rp}")]
    Unreachable {
        rp: NodeId,
        member: NodeId,
        role: Role,
    },
    #[error("group has no sources or no receivers")]
    EmptyGroup,
    #[error("node {0} is not a valid rendezvous point")]
    InvalidRp(NodeId),
}

/// Sources and receivers of a multicast group, by attachment node.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MulticastGroup {
    sources: Vec<NodeId>,
    receivers: Vec<NodeId>,
}

impl MulticastGroup {
    /// Sorts and deduplicates both member lists.
    pub fn new(sources: impl IntoIterator<Item = NodeId>, receivers: impl IntoIterator<Item = NodeId>) -> Self {
        let sources: BTreeSet<_> = sources.into_iter().collect();
        let receivers: BTreeSet<_> = receivers.into_iter().collect();
        Self {
            sources: sources.into_iter().collect(),
            receivers: receivers.into_iter().collect(),
        }
    }

    pub fn sources(&self) -> &[NodeId] {
        &self.sources
    }

    pub fn receivers(&self) -> &[NodeId] {
        &self.receivers
    }

    pub fn is_complete(&self) -> bool {
        !self.sources.is_empty() && !self.receivers.is_empty()
    }

    /// Checks both sets are non-empty and every member exists in `g`.
    pub fn validate(&self, g: &Graph) -> Result<(), String> {
        if !self.is_complete() {
            return Err("group needs at least one source and one receiver".into());
        }
        let n = g.node_count();
        if let Some(&m) = self.sources.iter().chain(&self.receivers).find(|&&m| m >= n) {
            return Err(format!("member {m} out of range for {n} nodes"));
        }
        Ok(())
    }

    /// `sources: id…` / `receivers: id…` sidecar format.
    pub fn to_group_file(&self) -> String {
        let join = |ids: &[NodeId]| {
            ids.iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!(
            "sources: {}\nreceivers: {}\n",
            join(&self.sources),
            join(&self.receivers)
        )
    }

    pub fn from_group_file(text: &str) -> Result<Self, GraphError> {
        let mut sources = None;
        let mut receivers = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rest) = line.split_once(':').ok_or_else(|| GraphError::Parse {
                line: idx + 1,
                msg: "expected `sources:` or `receivers:`".into(),
            })?;
            let ids = rest
                .split_whitespace()
                .map(|t| {
                    t.parse::<NodeId>().map_err(|_| GraphError::Parse {
                        line: idx + 1,
                        msg: format!("invalid node id `{t}`"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let slot = match key.trim() {
                "sources" => &mut sources,
                "receivers" => &mut receivers,
                other => {
                    return Err(GraphError::Parse {
                        line: idx + 1,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            };
            *slot = Some(ids);
        }
        match (sources, receivers) {
            (Some(s), Some(r)) => Ok(Self::new(s, r)),
            _ => Err(GraphError::Parse {
                line: 0,
                msg: "group file needs both `sources:` and `receivers:` lines".into(),
            }),
        }
    }
}

/// Upper bounds on the end-to-end delay and on the delay variation.
/// `f64::INFINITY` disables a bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosBounds {
    pub delay_bound: f64,
    pub variation_bound: f64,
}

impl QosBounds {
    pub fn new(delay_bound: f64, variation_bound: f64) -> Result<Self, String> {
        for (name, v) in [("delay", delay_bound), ("variation", variation_bound)] {
            if v.is_nan() || v <= 0.0 {
                return Err(format!("{name} bound must be positive, got {v}"));
            }
        }
        Ok(Self {
            delay_bound,
            variation_bound,
        })
    }

    pub const fn unbounded() -> Self {
        Self {
            delay_bound: f64::INFINITY,
            variation_bound: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessWeights {
    pub penalty: f64,
}

impl Default for FitnessWeights {
    fn default() -> Self {
        Self { penalty: 1e6 }
    }
}

/// Which end-to-end delays enter the max/min.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayPopulation {
    /// Every (source, receiver) pair.
    #[default]
    AllPairs,
    /// Only pairs whose source is the first (lowest-id) source.
    FirstSource,
}

/// How two evaluations are ordered during search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Scalar penalized fitness.
    #[default]
    Penalized,
    /// Feasible before infeasible, then fitness.
    Lexicographic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeEvaluation {
    pub cost: f64,
    pub max_delay: f64,
    pub min_delay: f64,
    pub delay_variation: f64,
    pub feasible: bool,
    pub fitness: f64,
}

impl TreeEvaluation {
    /// Scores a tree from its cost and its end-to-end pair delays.
    pub fn from_pair_delays(
        cost: f64,
        delays: impl IntoIterator<Item = f64>,
        bounds: &QosBounds,
        weights: &FitnessWeights,
    ) -> Self {
        let (mut max_delay, mut min_delay) = (f64::NEG_INFINITY, f64::INFINITY);
        for d in delays {
            max_delay = max_delay.max(d);
            min_delay = min_delay.min(d);
        }
        if max_delay < min_delay {
            max_delay = 0.0;
            min_delay = 0.0;
        }
        let delay_variation = max_delay - min_delay;
        let feasible = max_delay <= bounds.delay_bound && delay_variation <= bounds.variation_bound;
        let excess = |value: f64, bound: f64| {
            let over = (value - bound).max(0.0);
            if over == 0.0 {
                0.0
            } else {
                weights.penalty * over / bound
            }
        };
        let fitness = cost
            + excess(max_delay, bounds.delay_bound)
            + excess(delay_variation, bounds.variation_bound);
        Self {
            cost,
            max_delay,
            min_delay,
            delay_variation,
            feasible,
            fitness,
        }
    }

    pub fn csv_header() -> &'static str {
        "instance,algo,rp,cost,max_delay,min_delay,delay_variation,feasible,fitness"
    }

    pub fn csv_row(&self, instance: &str, algo: &str, rp: NodeId) -> String {
        format!(
            "{instance},{algo},{rp},{},{},{},{},{},{}",
            self.cost,
            self.max_delay,
            self.min_delay,
            self.delay_variation,
            self.feasible,
            self.fitness
        )
    }
}

/// Search key for an evaluation under an [`Objective`]; smaller is better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rank {
    tier: u8,
    value: f64,
}

impl Rank {
    pub const WORST: Rank = Rank {
        tier: u8::MAX,
        value: f64::INFINITY,
    };

    pub fn of(eval: &TreeEvaluation, objective: Objective) -> Self {
        let tier = match objective {
            Objective::Penalized => 0,
            Objective::Lexicographic => u8::from(!eval.feasible),
        };
        Rank {
            tier,
            value: eval.fitness,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tier != u8::MAX
    }
}

impl PartialOrd for Rank {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(
            self.tier
                .cmp(&other.tier)
                .then(self.value.total_cmp(&other.value)),
        )
    }
}

/// A shared tree rooted at `rp`.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticastTree {
    pub rp: NodeId,
    pub source_paths: BTreeMap<NodeId, Path>,
    pub receiver_paths: BTreeMap<NodeId, Path>,
    /// Directed edges in the union of receiver paths.
    pub tree_edges: BTreeSet<(NodeId, NodeId)>,
}

impl MulticastTree {
    fn from_tables(
        rp: NodeId,
        grp: &MulticastGroup,
        table_to_rp: impl Fn(NodeId) -> Option<Path>,
        from_rp: &DelayTable,
    ) -> Result<Self, Infeasible> {
        let mut source_paths = BTreeMap::new();
        for &s in grp.sources() {
            let p = table_to_rp(s).ok_or(Infeasible::Unreachable {
                rp,
                member: s,
                role: Role::Source,
            })?;
            source_paths.insert(s, p);
        }
        let mut receiver_paths = BTreeMap::new();
        let mut tree_edges = BTreeSet::new();
        for &d in grp.receivers() {
            let p = from_rp.path_to(d).ok_or(Infeasible::Unreachable {
                rp,
                member: d,
                role: Role::Receiver,
            })?;
            tree_edges.extend(p.edges());
            receiver_paths.insert(d, p);
        }
        Ok(Self {
            rp,
            source_paths,
            receiver_paths,
            tree_edges,
        })
    }

    /// Every node touched by a source or receiver path, plus the RP.
    pub fn nodes(&self) -> BTreeSet<NodeId> {
        let mut out: BTreeSet<NodeId> = self
            .source_paths
            .values()
            .chain(self.receiver_paths.values())
            .flat_map(|p| p.nodes.iter().copied())
            .collect();
        out.insert(self.rp);
        out
    }
}

/// Builds the shared tree rooted at `rp` from least-delay paths.
pub fn build_shared_tree(
    g: &Graph,
    rp: NodeId,
    grp: &MulticastGroup,
) -> Result<MulticastTree, Infeasible> {
    if rp >= g.node_count() {
        return Err(Infeasible::InvalidRp(rp));
    }
    let from_rp = g.delay_table_from(rp);
    MulticastTree::from_tables(rp, grp, |s| g.shortest_delay_path(s, rp), &from_rp)
}

/// Sum of every source-path cost plus every receiver-path cost. Overlapping
/// receiver paths are counted once per receiver.
pub fn tree_cost(t: &MulticastTree) -> f64 {
    t.source_paths
        .values()
        .chain(t.receiver_paths.values())
        .map(|p| p.total_cost)
        .sum()
}

/// Cost of the deduplicated receiver-tree edges plus the source paths.
pub fn tree_edge_cost(g: &Graph, t: &MulticastTree) -> f64 {
    let sources: f64 = t.source_paths.values().map(|p| p.total_cost).sum();
    let tree: f64 = t
        .tree_edges
        .iter()
        .map(|&(u, v)| g.edge(u, v).map_or(0.0, |a| a.cost))
        .sum();
    sources + tree
}

/// End-to-end delay of every (source, receiver) pair through the RP.
pub fn end_to_end_delays(t: &MulticastTree) -> BTreeMap<(NodeId, NodeId), f64> {
    let mut out = BTreeMap::new();
    for (&s, sp) in &t.source_paths {
        for (&d, dp) in &t.receiver_paths {
            out.insert((s, d), sp.total_delay + dp.total_delay);
        }
    }
    out
}

fn population_filter(population: DelayPopulation, grp: &MulticastGroup) -> impl Fn(NodeId) -> bool + '_ {
    move |s| match population {
        DelayPopulation::AllPairs => true,
        DelayPopulation::FirstSource => grp.sources().first() == Some(&s),
    }
}

/// Evaluates the tree rooted at `rp` over every (source, receiver) pair.
pub fn evaluate(
    g: &Graph,
    rp: NodeId,
    grp: &MulticastGroup,
    bounds: &QosBounds,
    weights: &FitnessWeights,
) -> Result<TreeEvaluation, Infeasible> {
    evaluate_with(g, rp, grp, bounds, weights, DelayPopulation::AllPairs)
}

pub fn evaluate_with(
    g: &Graph,
    rp: NodeId,
    grp: &MulticastGroup,
    bounds: &QosBounds,
    weights: &FitnessWeights,
    population: DelayPopulation,
) -> Result<TreeEvaluation, Infeasible> {
    if !grp.is_complete() {
        return Err(Infeasible::EmptyGroup);
    }
    let tree = build_shared_tree(g, rp, grp)?;
    Ok(evaluate_tree(&tree, grp, bounds, weights, population))
}

/// Scores an already built tree.
pub fn evaluate_tree(
    t: &MulticastTree,
    grp: &MulticastGroup,
    bounds: &QosBounds,
    weights: &FitnessWeights,
    population: DelayPopulation,
) -> TreeEvaluation {
    let keep = population_filter(population, grp);
    let delays = end_to_end_delays(t)
        .into_iter()
        .filter(|((s, _), _)| keep(*s))
        .map(|(_, d)| d);
    TreeEvaluation::from_pair_delays(tree_cost(t), delays, bounds, weights)
}

/// An RP-selection instance: topology, group, bounds and the set of eligible
/// RPs, with shortest-delay tables computed lazily and cached per node.
///
/// Safe to share across threads; each table is computed at most once.
#[derive(Debug)]
pub struct RpInstance<'a> {
    graph: &'a Graph,
    group: &'a MulticastGroup,
    bounds: QosBounds,
    weights: FitnessWeights,
    population: DelayPopulation,
    objective: Objective,
    candidates: Vec<NodeId>,
    is_candidate: Vec<bool>,
    tables: Vec<OnceLock<DelayTable>>,
}

impl<'a> RpInstance<'a> {
    pub fn new(graph: &'a Graph, group: &'a MulticastGroup, bounds: QosBounds) -> Self {
        let n = graph.node_count();
        Self {
            graph,
            group,
            bounds,
            weights: FitnessWeights::default(),
            population: DelayPopulation::default(),
            objective: Objective::default(),
            candidates: (0..n).collect(),
            is_candidate: vec![true; n],
            tables: (0..n).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn with_weights(mut self, weights: FitnessWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_population(mut self, population: DelayPopulation) -> Self {
        self.population = population;
        self
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    /// Restricts eligible RPs to `candidates` (out-of-range ids are dropped).
    pub fn with_candidates(mut self, candidates: impl IntoIterator<Item = NodeId>) -> Self {
        let n = self.graph.node_count();
        self.is_candidate = vec![false; n];
        for c in candidates {
            if c < n {
                self.is_candidate[c] = true;
            }
        }
        self.candidates = (0..n).filter(|&v| self.is_candidate[v]).collect();
        self
    }

    pub fn graph(&self) -> &'a Graph {
        self.graph
    }

    pub fn group(&self) -> &'a MulticastGroup {
        self.group
    }

    pub fn bounds(&self) -> &QosBounds {
        &self.bounds
    }

    pub fn weights(&self) -> &FitnessWeights {
        &self.weights
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    /// Eligible RPs in ascending order.
    pub fn candidates(&self) -> &[NodeId] {
        &self.candidates
    }

    pub fn is_candidate(&self, v: NodeId) -> bool {
        self.is_candidate.get(v).copied().unwrap_or(false)
    }

    pub fn table(&self, src: NodeId) -> &DelayTable {
        self.tables[src].get_or_init(|| self.graph.delay_table_from(src))
    }

    pub fn evaluate(&self, rp: NodeId) -> Result<TreeEvaluation, Infeasible> {
        if rp >= self.graph.node_count() {
            return Err(Infeasible::InvalidRp(rp));
        }
        if !self.group.is_complete() {
            return Err(Infeasible::EmptyGroup);
        }
        let mut cost = 0.0;
        let mut source_delays = Vec::with_capacity(self.group.sources().len());
        for &s in self.group.sources() {
            let t = self.table(s);
            if !t.is_reachable(rp) {
                return Err(Infeasible::Unreachable {
                    rp,
                    member: s,
                    role: Role::Source,
                });
            }
            cost += t.cost(rp);
            source_delays.push((s, t.delay(rp)));
        }
        let from_rp = self.table(rp);
        let mut receiver_delays = Vec::with_capacity(self.group.receivers().len());
        for &d in self.group.receivers() {
            if !from_rp.is_reachable(d) {
                return Err(Infeasible::Unreachable {
                    rp,
                    member: d,
                    role: Role::Receiver,
                });
            }
            cost += from_rp.cost(d);
            receiver_delays.push(from_rp.delay(d));
        }
        let keep = population_filter(self.population, self.group);
        let delays = source_delays
            .iter()
            .filter(|(s, _)| keep(*s))
            .flat_map(|&(_, sd)| receiver_delays.iter().map(move |&rd| sd + rd));
        Ok(TreeEvaluation::from_pair_delays(cost, delays, &self.bounds, &self.weights))
    }

    pub fn tree(&self, rp: NodeId) -> Result<MulticastTree, Infeasible> {
        if rp >= self.graph.node_count() {
            return Err(Infeasible::InvalidRp(rp));
        }
        MulticastTree::from_tables(rp, self.group, |s| self.table(s).path_to(rp), self.table(rp))
    }

    /// Search key for `rp`; unbuildable trees rank worst.
    pub fn rank(&self, rp: NodeId) -> Rank {
        self.evaluate(rp)
            .map_or(Rank::WORST, |e| Rank::of(&e, self.objective))
    }

    /// Fitness of `rp`, `f64::INFINITY` when the tree cannot be built.
    pub fn fitness(&self, rp: NodeId) -> f64 {
        self.evaluate(rp).map_or(f64::INFINITY, |e| e.fitness)
    }
}

/// Default bounds: 1.5 times the smallest achievable maximum delay and the
/// smallest achievable delay variation over all candidate RPs. A zero
/// minimum disables the corresponding bound.
pub fn auto_bounds(g: &Graph, grp: &MulticastGroup) -> Result<QosBounds, Infeasible> {
    auto_bounds_with(g, grp, DelayPopulation::AllPairs)
}

pub fn auto_bounds_with(
    g: &Graph,
    grp: &MulticastGroup,
    population: DelayPopulation,
) -> Result<QosBounds, Infeasible> {
    let inst = RpInstance::new(g, grp, QosBounds::unbounded()).with_population(population);
    let mut min_max = f64::INFINITY;
    let mut min_var = f64::INFINITY;
    let mut last_err = Infeasible::EmptyGroup;
    for v in 0..g.node_count() {
        match inst.evaluate(v) {
            Ok(e) => {
                min_max = min_max.min(e.max_delay);
                min_var = min_var.min(e.delay_variation);
            }
            Err(e) => last_err = e,
        }
    }
    if !min_max.is_finite() {
        return Err(last_err);
    }
    let scale = |m: f64| if m > 0.0 { 1.5 * m } else { f64::INFINITY };
    Ok(QosBounds {
        delay_bound: scale(min_max),
        variation_bound: scale(min_var),
    })
}

/// Text dump of a tree, one path per line.
pub fn describe_tree(t: &MulticastTree) -> String {
    let mut s = String::new();
    writeln!(s, "rp {}", t.rp).unwrap();
    for (src, p) in &t.source_paths {
        writeln!(s, "source {src}: {:?}", p.nodes).unwrap();
    }
    for (d, p) in &t.receiver_paths {
        writeln!(s, "receiver {d}: {:?}", p.nodes).unwrap();
    }
    s
}
