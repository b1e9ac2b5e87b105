//! Directed weighted graph with per-edge cost and delay, plus shortest-delay
//! path machinery.
//!
//! Every edge carries two non-negative weights: a cost (resource usage) and a
//! delay. Shortest paths are always computed on the delay metric; the cost of
//! the chosen path is reported alongside. Ties between equal-delay paths are
//! broken by lower cost, then by the lexicographically smallest node
//! sequence, so every query is fully deterministic.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

/// Dense node index in `[0, node_count)`.
pub type NodeId = usize;

/// Relative tolerance under which two delays (or costs) compare equal.
pub const REL_TOLERANCE: f64 = 1e-9;

/// `true` when `a` and `b` differ by at most [`REL_TOLERANCE`] relative to
/// the larger magnitude.
pub fn approx_eq(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= REL_TOLERANCE * scale
}

/// Tolerance-aware three-way comparison.
pub fn approx_cmp(a: f64, b: f64) -> Ordering {
    if approx_eq(a, b) {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),
    #[error("node {node} out of range for graph with {node_count} nodes")]
    NodeOutOfRange { node: NodeId, node_count: usize },
    #[error("edge ({u}, {v}) has invalid weights: cost {cost}, delay {delay}")]
    InvalidWeight {
        u: NodeId,
        v: NodeId,
        cost: f64,
        delay: f64,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Cost and delay of one directed edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeAttr {
    pub cost: f64,
    pub delay: f64,
}

impl EdgeAttr {
    pub fn new(cost: f64, delay: f64) -> Self {
        Self { cost, delay }
    }

    fn is_valid(&self) -> bool {
        self.cost.is_finite() && self.delay.is_finite() && self.cost >= 0.0 && self.delay >= 0.0
    }
}

/// A simple directed graph: no self-loops, at most one edge per ordered pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Graph {
    out: Vec<BTreeMap<NodeId, EdgeAttr>>,
    edge_count: usize,
}

impl Graph {
    /// Graph with `node_count` nodes and no edges.
    pub fn new(node_count: usize) -> Self {
        Self {
            out: vec![BTreeMap::new(); node_count],
            edge_count: 0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    /// Number of directed edges.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    fn check_node(&self, node: NodeId) -> Result<(), GraphError> {
        if node < self.node_count() {
            Ok(())
        } else {
            Err(GraphError::NodeOutOfRange {
                node,
                node_count: self.node_count(),
            })
        }
    }

    /// Adds the directed edge `u -> v`.
    pub fn add_edge(&mut self, u: NodeId, v: NodeId, attr: EdgeAttr) -> Result<(), GraphError> {
        self.check_node(u)?;
        self.check_node(v)?;
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        if !attr.is_valid() {
            return Err(GraphError::InvalidWeight {
                u,
                v,
                cost: attr.cost,
                delay: attr.delay,
            });
        }
        if self.out[u].contains_key(&v) {
            return Err(GraphError::DuplicateEdge(u, v));
        }
        self.out[u].insert(v, attr);
        self.edge_count += 1;
        Ok(())
    }

    /// Adds `u -> v` with `forward` and `v -> u` with `backward`.
    pub fn add_link(
        &mut self,
        u: NodeId,
        v: NodeId,
        forward: EdgeAttr,
        backward: EdgeAttr,
    ) -> Result<(), GraphError> {
        if self.has_edge(u, v) {
            return Err(GraphError::DuplicateEdge(u, v));
        }
        if self.has_edge(v, u) {
            return Err(GraphError::DuplicateEdge(v, u));
        }
        self.add_edge(u, v, forward)?;
        self.add_edge(v, u, backward)
    }

    pub fn remove_edge(&mut self, u: NodeId, v: NodeId) -> Option<EdgeAttr> {
        let removed = self.out.get_mut(u)?.remove(&v);
        if removed.is_some() {
            self.edge_count -= 1;
        }
        removed
    }

    pub fn edge(&self, u: NodeId, v: NodeId) -> Option<EdgeAttr> {
        self.out.get(u)?.get(&v).copied()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.edge(u, v).is_some()
    }

    /// Out-neighbors of `u` in ascending id order.
    pub fn neighbors(&self, u: NodeId) -> impl Iterator<Item = (NodeId, EdgeAttr)> + '_ {
        self.out[u].iter().map(|(&v, &a)| (v, a))
    }

    pub fn out_degree(&self, u: NodeId) -> usize {
        self.out[u].len()
    }

    /// All directed edges in `(u, v)` lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, EdgeAttr)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(u, m)| m.iter().map(move |(&v, &a)| (u, v, a)))
    }

    /// `true` when every edge has its reverse.
    pub fn is_symmetric(&self) -> bool {
        self.edges().all(|(u, v, _)| self.has_edge(v, u))
    }

    /// Number of unordered node pairs joined in at least one direction.
    pub fn link_count(&self) -> usize {
        self.edges()
            .filter(|&(u, v, _)| u < v || !self.has_edge(v, u))
            .count()
    }

    /// Mean undirected degree, `2 * links / nodes`.
    pub fn mean_degree(&self) -> f64 {
        if self.node_count() == 0 {
            return 0.0;
        }
        2.0 * self.link_count() as f64 / self.node_count() as f64
    }

    /// Single-source shortest-delay sweep from `src`.
    pub fn delay_table_from(&self, src: NodeId) -> DelayTable {
        DelayTable::compute(self, src)
    }

    /// Least-delay path from `src` to `dst`, or `None` when unreachable.
    pub fn shortest_delay_path(&self, src: NodeId, dst: NodeId) -> Option<Path> {
        self.delay_table_from(src).path_to(dst)
    }

    /// Hop counts from `src` over out-edges; `None` for unreachable nodes.
    pub fn hop_distances(&self, src: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        let mut queue = std::collections::VecDeque::new();
        dist[src] = Some(0);
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let next = dist[u].unwrap() + 1;
            for (v, _) in self.neighbors(u) {
                if dist[v].is_none() {
                    dist[v] = Some(next);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Serializes to the edge-list text format.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        writeln!(s, "#nodes {}", self.node_count()).unwrap();
        for (u, v, a) in self.edges() {
            writeln!(s, "{u} {v} {} {}", a.cost, a.delay).unwrap();
        }
        s
    }

    /// Parses the edge-list text format: a `#nodes <N>` header, then one
    /// `u v cost delay` record per line. Other `#` lines are ignored.
    pub fn from_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut graph: Option<Graph> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim_start();
                if let Some(n) = rest.strip_prefix("nodes") {
                    if graph.is_some() {
                        return Err(parse_err(line_no, "repeated #nodes header"));
                    }
                    let n = parse_field::<usize>(n.trim(), line_no, "node count")?;
                    graph = Some(Graph::new(n));
                }
                continue;
            }
            let g = graph
                .as_mut()
                .ok_or_else(|| parse_err(line_no, "edge record before #nodes header"))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(parse_err(line_no, "expected `u v cost delay`"));
            }
            let u = parse_field::<NodeId>(fields[0], line_no, "source node")?;
            let v = parse_field::<NodeId>(fields[1], line_no, "target node")?;
            let cost = parse_field::<f64>(fields[2], line_no, "cost")?;
            let delay = parse_field::<f64>(fields[3], line_no, "delay")?;
            g.add_edge(u, v, EdgeAttr::new(cost, delay))
                .map_err(|e| parse_err(line_no, &e.to_string()))?;
        }
        graph.ok_or_else(|| parse_err(0, "missing #nodes header"))
    }
}

fn parse_err(line: usize, msg: &str) -> GraphError {
    GraphError::Parse {
        line,
        msg: msg.to_string(),
    }
}

fn parse_field<T: FromStr>(s: &str, line: usize, what: &str) -> Result<T, GraphError> {
    s.parse()
        .map_err(|_| parse_err(line, &format!("invalid {what} `{s}`")))
}

/// A walk through the graph with its accumulated cost and delay.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub total_cost: f64,
    pub total_delay: f64,
}

impl Path {
    pub fn single(node: NodeId) -> Self {
        Self {
            nodes: vec![node],
            total_cost: 0.0,
            total_delay: 0.0,
        }
    }

    /// Builds a path by walking `nodes` over `g`; `None` if a hop is missing.
    pub fn from_nodes(g: &Graph, nodes: Vec<NodeId>) -> Option<Self> {
        if nodes.is_empty() {
            return None;
        }
        let mut cost = 0.0;
        let mut delay = 0.0;
        for w in nodes.windows(2) {
            let a = g.edge(w[0], w[1])?;
            cost += a.cost;
            delay += a.delay;
        }
        Some(Self {
            nodes,
            total_cost: cost,
            total_delay: delay,
        })
    }

    pub fn source(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn target(&self) -> NodeId {
        *self.nodes.last().unwrap()
    }

    pub fn hop_count(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Directed edges traversed, in order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        self.nodes.contains(&node)
    }

    /// `true` if the path crosses the link `{u, v}` in either direction.
    pub fn uses_link(&self, u: NodeId, v: NodeId) -> bool {
        self.edges()
            .any(|(a, b)| (a == u && b == v) || (a == v && b == u))
    }
}

#[derive(Copy, Clone, PartialEq)]
struct QueueEntry {
    delay: f64,
    cost: f64,
    node: NodeId,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .delay
            .total_cmp(&self.delay)
            .then_with(|| other.cost.total_cmp(&self.cost))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Result of a shortest-delay sweep from one source.
///
/// Unreachable nodes carry an infinite delay and no predecessor.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTable {
    source: NodeId,
    delay: Vec<f64>,
    cost: Vec<f64>,
    pred: Vec<Option<NodeId>>,
}

impl DelayTable {
    /// Dijkstra ordered by (delay, cost). Zero-weight edges can tie a
    /// settled node with a better route found later, so a node is reopened
    /// whenever its label strictly improves; stale queue entries are skipped.
    fn compute(g: &Graph, src: NodeId) -> Self {
        let n = g.node_count();
        let mut table = Self {
            source: src,
            delay: vec![f64::INFINITY; n],
            cost: vec![f64::INFINITY; n],
            pred: vec![None; n],
        };
        let mut heap = BinaryHeap::new();
        table.delay[src] = 0.0;
        table.cost[src] = 0.0;
        heap.push(QueueEntry {
            delay: 0.0,
            cost: 0.0,
            node: src,
        });

        while let Some(QueueEntry { delay, cost, node: u }) = heap.pop() {
            if delay.to_bits() != table.delay[u].to_bits() || cost.to_bits() != table.cost[u].to_bits() {
                continue;
            }
            for (v, attr) in g.neighbors(u) {
                if v == src {
                    continue;
                }
                let delay = table.delay[u] + attr.delay;
                let cost = table.cost[u] + attr.cost;
                if table.improves(u, v, delay, cost) {
                    table.delay[v] = delay;
                    table.cost[v] = cost;
                    table.pred[v] = Some(u);
                    heap.push(QueueEntry { delay, cost, node: v });
                }
            }
        }
        table
    }

    /// Whether reaching `v` through `u` with the given totals beats the
    /// current label of `v`.
    fn improves(&self, u: NodeId, v: NodeId, delay: f64, cost: f64) -> bool {
        if self.pred[v].is_none() {
            return true;
        }
        match approx_cmp(delay, self.delay[v]) {
            Ordering::Less => return true,
            Ordering::Greater => return false,
            Ordering::Equal => {}
        }
        match approx_cmp(cost, self.cost[v]) {
            Ordering::Less => return true,
            Ordering::Greater => return false,
            Ordering::Equal => {}
        }
        let mut candidate = self.node_sequence(u);
        candidate.push(v);
        candidate < self.node_sequence(v)
    }

    fn node_sequence(&self, v: NodeId) -> Vec<NodeId> {
        let mut seq = vec![v];
        let mut cur = v;
        while let Some(p) = self.pred[cur] {
            seq.push(p);
            cur = p;
        }
        seq.reverse();
        seq
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    /// Shortest delay to `v`; `f64::INFINITY` when unreachable.
    pub fn delay(&self, v: NodeId) -> f64 {
        self.delay[v]
    }

    /// Cost along the chosen shortest-delay path to `v`.
    pub fn cost(&self, v: NodeId) -> f64 {
        self.cost[v]
    }

    pub fn predecessor(&self, v: NodeId) -> Option<NodeId> {
        self.pred[v]
    }

    pub fn is_reachable(&self, v: NodeId) -> bool {
        self.delay[v].is_finite()
    }

    pub fn path_to(&self, v: NodeId) -> Option<Path> {
        if !self.is_reachable(v) {
            return None;
        }
        Some(Path {
            nodes: self.node_sequence(v),
            total_cost: self.cost[v],
            total_delay: self.delay[v],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attr(cost: f64, delay: f64) -> EdgeAttr {
        EdgeAttr::new(cost, delay)
    }

    #[test]
    fn add_edge_errors() {
        let mut g = Graph::new(2);
        g.add_edge(0, 1, attr(1.0, 5.0)).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.add_edge(0, 0, attr(1.0, 1.0)), Err(GraphError::SelfLoop(0)));
        assert_eq!(
            g.add_edge(0, 1, attr(1.0, 1.0)),
            Err(GraphError::DuplicateEdge(0, 1))
        );
        assert!(matches!(
            g.add_edge(0, 2, attr(1.0, 1.0)),
            Err(GraphError::NodeOutOfRange { node: 2, .. })
        ));
        assert!(matches!(
            g.add_edge(1, 0, attr(-1.0, 1.0)),
            Err(GraphError::InvalidWeight { .. })
        ));
        assert!(matches!(
            g.add_edge(1, 0, attr(1.0, f64::NAN)),
            Err(GraphError::InvalidWeight { .. })
        ));
    }

    #[test]
    fn identity_path() {
        let g = Graph::new(3);
        let p = g.shortest_delay_path(1, 1).unwrap();
        assert_eq!(p.nodes, vec![1]);
        assert_eq!(p.total_cost, 0.0);
        assert_eq!(p.total_delay, 0.0);
    }

    #[test]
    fn two_node_path() {
        let mut g = Graph::new(2);
        g.add_edge(0, 1, attr(1.0, 5.0)).unwrap();
        let p = g.shortest_delay_path(0, 1).unwrap();
        assert_eq!(p.nodes, vec![0, 1]);
        assert_eq!(p.total_delay, 5.0);
        assert_eq!(p.total_cost, 1.0);
        assert!(g.shortest_delay_path(1, 0).is_none());
    }

    #[test]
    fn triangle_prefers_two_hops() {
        let mut g = Graph::new(3);
        g.add_edge(0, 1, attr(1.0, 1.0)).unwrap();
        g.add_edge(1, 2, attr(1.0, 1.0)).unwrap();
        g.add_edge(0, 2, attr(1.0, 3.0)).unwrap();
        let p = g.shortest_delay_path(0, 2).unwrap();
        assert_eq!(p.nodes, vec![0, 1, 2]);
        assert_eq!(p.total_delay, 2.0);
    }

    #[test]
    fn delay_ties_prefer_cost_then_lexicographic() {
        // 0 -> 1 -> 3 and 0 -> 2 -> 3 both have delay 2.
        let mut g = Graph::new(4);
        g.add_edge(0, 1, attr(5.0, 1.0)).unwrap();
        g.add_edge(1, 3, attr(5.0, 1.0)).unwrap();
        g.add_edge(0, 2, attr(1.0, 1.0)).unwrap();
        g.add_edge(2, 3, attr(1.0, 1.0)).unwrap();
        assert_eq!(g.shortest_delay_path(0, 3).unwrap().nodes, vec![0, 2, 3]);

        let mut g = Graph::new(4);
        g.add_edge(0, 2, attr(1.0, 1.0)).unwrap();
        g.add_edge(2, 3, attr(1.0, 1.0)).unwrap();
        g.add_edge(0, 1, attr(1.0, 1.0)).unwrap();
        g.add_edge(1, 3, attr(1.0, 1.0)).unwrap();
        assert_eq!(g.shortest_delay_path(0, 3).unwrap().nodes, vec![0, 1, 3]);
    }

    #[test]
    fn table_single_node_and_path_graph() {
        let g = Graph::new(1);
        let t = g.delay_table_from(0);
        assert_eq!(t.delay(0), 0.0);
        assert_eq!(t.predecessor(0), None);

        let mut g = Graph::new(3);
        g.add_edge(0, 1, attr(1.0, 1.0)).unwrap();
        g.add_edge(1, 2, attr(1.0, 2.0)).unwrap();
        let t = g.delay_table_from(0);
        assert_eq!(
            (t.delay(0), t.delay(1), t.delay(2)),
            (0.0, 1.0, 3.0)
        );
        assert_eq!(t.predecessor(2), Some(1));
        let back = g.delay_table_from(2);
        assert_eq!(back.delay(0), f64::INFINITY);
        assert!(!back.is_reachable(0));
    }

    #[test]
    fn edge_list_round_trip() {
        let mut g = Graph::new(4);
        g.add_link(0, 1, attr(1.25, 0.1), attr(3.0, 7.000000000000001))
            .unwrap();
        g.add_edge(2, 3, attr(9.87654321, 1e-7)).unwrap();
        let text = g.to_edge_list();
        assert!(text.starts_with("#nodes 4\n"));
        let back = Graph::from_edge_list(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_edge_list(), text);
    }

    #[test]
    fn edge_list_parse_errors() {
        assert!(matches!(
            Graph::from_edge_list("0 1 1 1\n"),
            Err(GraphError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Graph::from_edge_list("#nodes 2\n0 1 x 1\n"),
            Err(GraphError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Graph::from_edge_list("#nodes 2\n# comment\n0 0 1 1\n"),
            Err(GraphError::Parse { line: 3, .. })
        ));
        assert!(Graph::from_edge_list("# nothing\n").is_err());
    }

    #[test]
    fn mean_degree_counts_links() {
        let mut g = Graph::new(4);
        g.add_link(0, 1, attr(1.0, 1.0), attr(1.0, 1.0)).unwrap();
        g.add_edge(2, 3, attr(1.0, 1.0)).unwrap();
        assert_eq!(g.link_count(), 2);
        assert_eq!(g.mean_degree(), 1.0);
        assert!(!g.is_symmetric());
    }
}
