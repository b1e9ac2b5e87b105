//! Random network generation (flat Waxman model), component repair and
//! multicast group sampling. Every generator is a pure function of its
//! parameter record, seed included.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeAttr, Graph, NodeId};
use crate::metrics::MulticastGroup;

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("invalid Waxman parameters: {0}")]
    InvalidParams(String),
    #[error("group fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("cannot draw {requested} distinct sources from {available} nodes")]
    TooManySources { requested: usize, available: usize },
}

/// Closed interval `[lo, hi]` for uniformly drawn edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightRange {
    pub lo: f64,
    pub hi: f64,
}

impl WeightRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo >= 0.0 && self.lo <= self.hi
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }
}

impl Default for WeightRange {
    fn default() -> Self {
        Self::new(1.0, 10.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaxmanParams {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    #[serde(default)]
    pub cost_range: WeightRange,
    #[serde(default)]
    pub delay_range: WeightRange,
    /// Copy forward attributes onto the reverse edge instead of drawing them
    /// independently.
    #[serde(default)]
    pub symmetric_weights: bool,
}

impl WaxmanParams {
    /// `alpha = beta = 0.2` with default weight ranges.
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            alpha: 0.2,
            beta: 0.2,
            seed,
            cost_range: WeightRange::default(),
            delay_range: WeightRange::default(),
            symmetric_weights: false,
        }
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        let bad = |m: &str| Err(TopologyError::InvalidParams(m.to_string()));
        if self.n < 1 {
            return bad("n must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad("beta must lie in (0, 1]");
        }
        if !self.cost_range.is_valid() {
            return bad("cost range must satisfy 0 <= lo <= hi");
        }
        if !self.delay_range.is_valid() {
            return bad("delay range must satisfy 0 <= lo <= hi");
        }
        Ok(())
    }
}

/// A generated network together with the planar coordinates of its nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub graph: Graph,
    pub coords: Vec<(f64, f64)>,
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Waxman link probability `alpha * exp(-d / (beta * max_distance))`.
pub fn waxman_probability(alpha: f64, beta: f64, d: f64, max_distance: f64) -> f64 {
    if max_distance <= 0.0 {
        return alpha;
    }
    alpha * (-d / (beta * max_distance)).exp()
}

/// Places `n` nodes uniformly in the unit square and links each unordered
/// pair with the Waxman probability, in both directions.
pub fn waxman_generate(p: &WaxmanParams) -> Result<Topology, TopologyError> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let coords: Vec<(f64, f64)> = (0..p.n)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect();

    let mut max_distance = 0.0f64;
    for u in 0..p.n {
        for v in (u + 1)..p.n {
            max_distance = max_distance.max(distance(coords[u], coords[v]));
        }
    }

    let mut graph = Graph::new(p.n);
    for u in 0..p.n {
        for v in (u + 1)..p.n {
            let prob = waxman_probability(p.alpha, p.beta, distance(coords[u], coords[v]), max_distance);
            if rng.random::<f64>() >= prob {
                continue;
            }
            let forward = EdgeAttr::new(p.cost_range.sample(&mut rng), p.delay_range.sample(&mut rng));
            let backward = if p.symmetric_weights {
                forward
            } else {
                EdgeAttr::new(p.cost_range.sample(&mut rng), p.delay_range.sample(&mut rng))
            };
            graph
                .add_link(u, v, forward, backward)
                .expect("generated links are unique and valid");
        }
    }
    Ok(Topology { graph, coords })
}

/// Weakly connected components, each sorted ascending, ordered by their
/// smallest member.
pub fn connected_components(g: &Graph) -> Vec<Vec<NodeId>> {
    let n = g.node_count();
    let mut undirected = vec![Vec::new(); n];
    for (u, v, _) in g.edges() {
        undirected[u].push(v);
        undirected[v].push(u);
    }
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut i = 0;
        while i < members.len() {
            let u = members[i];
            i += 1;
            for &v in &undirected[u] {
                if comp[v] == usize::MAX {
                    comp[v] = id;
                    members.push(v);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Restricts `g` to its largest weakly connected component, renumbering
/// nodes densely in their original order.
///
/// Returns the new graph and the map from new ids to original ids. Among
/// equally large components the one holding the smallest original id wins.
pub fn largest_connected_component(g: &Graph) -> (Graph, Vec<NodeId>) {
    let comps = connected_components(g);
    let Some(best) = comps
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
        .map(|(_, c)| c.clone())
    else {
        return (Graph::new(0), Vec::new());
    };
    let mut new_id = vec![usize::MAX; g.node_count()];
    for (i, &old) in best.iter().enumerate() {
        new_id[old] = i;
    }
    let mut out = Graph::new(best.len());
    for (u, v, a) in g.edges() {
        if new_id[u] != usize::MAX && new_id[v] != usize::MAX {
            out.add_edge(new_id[u], new_id[v], a)
                .expect("subgraph of a simple graph is simple");
        }
    }
    (out, best)
}

impl Topology {
    /// [`largest_connected_component`] that also carries the coordinates.
    pub fn largest_component(&self) -> (Topology, Vec<NodeId>) {
        let (graph, map) = largest_connected_component(&self.graph);
        let coords = map.iter().map(|&old| self.coords[old]).collect();
        (Topology { graph, coords }, map)
    }
}

/// Number of receivers drawn for `fraction` of `n` nodes, `ceil(fraction * n)`.
pub fn receiver_count(fraction: f64, n: usize) -> usize {
    // Guard against 0.1 * 30 = 3.0000000000000004 style rounding.
    let k = (fraction * n as f64 - 1e-9).ceil().max(1.0) as usize;
    k.min(n)
}

/// Draws `ceil(fraction * |N|)` receivers and `n_sources` sources, each
/// without replacement. Sources may also be receivers.
pub fn sample_group(
    g: &Graph,
    fraction: f64,
    n_sources: usize,
    seed: u64,
) -> Result<MulticastGroup, TopologyError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(TopologyError::InvalidFraction(fraction));
    }
    let n = g.node_count();
    if n_sources == 0 || n_sources > n {
        return Err(TopologyError::TooManySources {
            requested: n_sources,
            available: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let receivers = index::sample(&mut rng, n, receiver_count(fraction, n)).into_vec();
    let sources = index::sample(&mut rng, n, n_sources).into_vec();
    Ok(MulticastGroup::new(sources, receivers))
}
