use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::graph::{Graph, NodeId};
use crate::metrics::MulticastGroup;

/// Members are identified by their home node: the node they first attached
/// at. Their current attachment may differ after handovers.
pub type MemberId = NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Receiver joins at its home node.
    Join(NodeId),
    /// Receiver leaves.
    Leave(MemberId),
    Handover {
        member: MemberId,
        from: NodeId,
        to: NodeId,
    },
    LinkFail(NodeId, NodeId),
    LinkRestore(NodeId, NodeId),
    NodeFail(NodeId),
    NodeRestore(NodeId),
    PeriodicTimer,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Join(_) => "join",
            EventKind::Leave(_) => "leave",
            EventKind::Handover { .. } => "handover",
            EventKind::LinkFail(..) => "link_fail",
            EventKind::LinkRestore(..) => "link_restore",
            EventKind::NodeFail(_) => "node_fail",
            EventKind::NodeRestore(_) => "node_restore",
            EventKind::PeriodicTimer => "periodic_timer",
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, EventKind::LinkFail(..) | EventKind::NodeFail(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub time: f64,
    pub kind: EventKind,
}

impl SessionEvent {
    pub fn new(time: f64, kind: EventKind) -> Self {
        Self { time, kind }
    }
}

/// `t kind args…`, e.g. `12.5 handover 7 3 9`.
impl fmt::Display for SessionEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.time, self.kind.name())?;
        match self.kind {
            EventKind::Join(n) | EventKind::Leave(n) | EventKind::NodeFail(n) | EventKind::NodeRestore(n) => {
                write!(f, " {n}")
            }
            EventKind::Handover { member, from, to } => write!(f, " {member} {from} {to}"),
            EventKind::LinkFail(u, v) | EventKind::LinkRestore(u, v) => write!(f, " {u} {v}"),
            EventKind::PeriodicTimer => Ok(()),
        }
    }
}

impl FromStr for SessionEvent {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 {
            return Err("expected `time kind args…`".into());
        }
        let time: f64 = fields[0]
            .parse()
            .map_err(|_| format!("invalid time `{}`", fields[0]))?;
        let args = &fields[2..];
        let arity = |n: usize| -> Result<Vec<NodeId>, String> {
            if args.len() != n {
                return Err(format!("`{}` takes {n} arguments", fields[1]));
            }
            args.iter()
                .map(|a| a.parse::<NodeId>().map_err(|_| format!("invalid node id `{a}`")))
                .collect()
        };
        let kind = match fields[1] {
            "join" => EventKind::Join(arity(1)?[0]),
            "leave" => EventKind::Leave(arity(1)?[0]),
            "handover" => {
                let a = arity(3)?;
                EventKind::Handover {
                    member: a[0],
                    from: a[1],
                    to: a[2],
                }
            }
            "link_fail" => {
                let a = arity(2)?;
                EventKind::LinkFail(a[0], a[1])
            }
            "link_restore" => {
                let a = arity(2)?;
                EventKind::LinkRestore(a[0], a[1])
            }
            "node_fail" => EventKind::NodeFail(arity(1)?[0]),
            "node_restore" => EventKind::NodeRestore(arity(1)?[0]),
            "periodic_timer" => {
                arity(0)?;
                EventKind::PeriodicTimer
            }
            other => return Err(format!("unknown event kind `{other}`")),
        };
        Ok(SessionEvent { time, kind })
    }
}

/// Formats a trace, one event per line.
pub fn format_trace(events: &[SessionEvent]) -> String {
    events.iter().map(|e| format!("{e}\n")).collect()
}

/// Parses a trace file; blank lines and `#` comments are skipped.
pub fn parse_trace(text: &str) -> Result<Vec<SessionEvent>, SessionError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.parse().map_err(|reason| SessionError::Parse {
                line: i + 1,
                reason,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Member {
    pub attach: NodeId,
    pub source: bool,
    pub receiver: bool,
}

fn link_key(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    (u.min(v), u.max(v))
}

/// Failure and membership state of a session, independent of any RP.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    base: Graph,
    alive: Vec<bool>,
    failed_links: BTreeSet<(NodeId, NodeId)>,
    members: BTreeMap<MemberId, Member>,
}

impl NetworkState {
    pub fn new(base: Graph, grp: &MulticastGroup) -> Self {
        let mut members: BTreeMap<MemberId, Member> = BTreeMap::new();
        for &s in grp.sources() {
            members.insert(
                s,
                Member {
                    attach: s,
                    source: true,
                    receiver: false,
                },
            );
        }
        for &d in grp.receivers() {
            members
                .entry(d)
                .or_insert(Member {
                    attach: d,
                    source: false,
                    receiver: false,
                })
                .receiver = true;
        }
        let n = base.node_count();
        Self {
            base,
            alive: vec![true; n],
            failed_links: BTreeSet::new(),
            members,
        }
    }

    pub fn base(&self) -> &Graph {
        &self.base
    }

    pub fn node_count(&self) -> usize {
        self.base.node_count()
    }

    pub fn is_alive(&self, v: NodeId) -> bool {
        self.alive.get(v).copied().unwrap_or(false)
    }

    pub fn alive_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count()).filter(|&v| self.alive[v])
    }

    pub fn is_link_failed(&self, u: NodeId, v: NodeId) -> bool {
        self.failed_links.contains(&link_key(u, v))
    }

    pub fn members(&self) -> &BTreeMap<MemberId, Member> {
        &self.members
    }

    /// Unordered links of the base graph, as `(min, max)` pairs.
    pub fn base_links(&self) -> Vec<(NodeId, NodeId)> {
        let set: BTreeSet<_> = self.base.edges().map(|(u, v, _)| link_key(u, v)).collect();
        set.into_iter().collect()
    }

    /// The base graph minus failed nodes and links.
    pub fn live_graph(&self) -> Graph {
        let mut g = Graph::new(self.node_count());
        for (u, v, a) in self.base.edges() {
            if self.alive[u] && self.alive[v] && !self.is_link_failed(u, v) {
                g.add_edge(u, v, a).expect("copy of a simple graph");
            }
        }
        g
    }

    /// Group by current attachment node.
    pub fn group(&self) -> MulticastGroup {
        MulticastGroup::new(
            self.members.values().filter(|m| m.source).map(|m| m.attach),
            self.members.values().filter(|m| m.receiver).map(|m| m.attach),
        )
    }

    pub fn receiver_members(&self) -> impl Iterator<Item = (MemberId, &Member)> + '_ {
        self.members
            .iter()
            .filter(|(_, m)| m.receiver)
            .map(|(&id, m)| (id, m))
    }

    fn check_node(&self, v: NodeId) -> Result<(), String> {
        if v < self.node_count() {
            Ok(())
        } else {
            Err(format!("node {v} out of range"))
        }
    }

    /// Checks `kind` is consistent with the current state.
    pub fn validate(&self, kind: &EventKind) -> Result<(), String> {
        match *kind {
            EventKind::Join(n) => {
                self.check_node(n)?;
                if !self.alive[n] {
                    return Err(format!("join at failed node {n}"));
                }
                if self.members.get(&n).is_some_and(|m| m.receiver) {
                    return Err(format!("node {n} is already a receiver"));
                }
            }
            EventKind::Leave(m) => {
                if !self.members.get(&m).is_some_and(|m| m.receiver) {
                    return Err(format!("member {m} is not a receiver"));
                }
            }
            EventKind::Handover { member, from, to } => {
                let Some(m) = self.members.get(&member) else {
                    return Err(format!("unknown member {member}"));
                };
                if m.attach != from {
                    return Err(format!("member {member} is attached at {}, not {from}", m.attach));
                }
                self.check_node(to)?;
                if to == from {
                    return Err("handover to the same node".into());
                }
                if !self.alive[to] {
                    return Err(format!("handover to failed node {to}"));
                }
            }
            EventKind::LinkFail(u, v) => {
                self.check_node(u)?;
                self.check_node(v)?;
                if !(self.base.has_edge(u, v) || self.base.has_edge(v, u)) {
                    return Err(format!("no link ({u}, {v})"));
                }
                if self.is_link_failed(u, v) {
                    return Err(format!("link ({u}, {v}) already failed"));
                }
            }
            EventKind::LinkRestore(u, v) => {
                if !self.is_link_failed(u, v) {
                    return Err(format!("link ({u}, {v}) is not failed"));
                }
            }
            EventKind::NodeFail(n) => {
                self.check_node(n)?;
                if !self.alive[n] {
                    return Err(format!("node {n} already failed"));
                }
            }
            EventKind::NodeRestore(n) => {
                self.check_node(n)?;
                if self.alive[n] {
                    return Err(format!("node {n} is not failed"));
                }
            }
            EventKind::PeriodicTimer => {}
        }
        Ok(())
    }

    /// Validates then applies `kind`.
    pub fn apply(&mut self, kind: &EventKind) -> Result<(), String> {
        self.validate(kind)?;
        match *kind {
            EventKind::Join(n) => {
                self.members
                    .entry(n)
                    .or_insert(Member {
                        attach: n,
                        source: false,
                        receiver: false,
                    })
                    .receiver = true;
            }
            EventKind::Leave(id) => {
                let m = self.members.get_mut(&id).expect("validated");
                m.receiver = false;
                if !m.source {
                    self.members.remove(&id);
                }
            }
            EventKind::Handover { member, to, .. } => {
                self.members.get_mut(&member).expect("validated").attach = to;
            }
            EventKind::LinkFail(u, v) => {
                self.failed_links.insert(link_key(u, v));
            }
            EventKind::LinkRestore(u, v) => {
                self.failed_links.remove(&link_key(u, v));
            }
            EventKind::NodeFail(n) => self.alive[n] = false,
            EventKind::NodeRestore(n) => self.alive[n] = true,
            EventKind::PeriodicTimer => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeAttr;

    fn square() -> Graph {
        let mut g = Graph::new(4);
        for u in 0..4 {
            g.add_link(u, (u + 1) % 4, EdgeAttr::new(1.0, 1.0), EdgeAttr::new(1.0, 1.0))
                .unwrap();
        }
        g
    }

    #[test]
    fn event_text_round_trip() {
        let events = [
            SessionEvent::new(12.5, EventKind::Handover { member: 7, from: 3, to: 9 }),
            SessionEvent::new(0.1, EventKind::Join(4)),
            SessionEvent::new(1.0, EventKind::Leave(4)),
            SessionEvent::new(2.0, EventKind::LinkFail(1, 2)),
            SessionEvent::new(3.0, EventKind::LinkRestore(1, 2)),
            SessionEvent::new(4.0, EventKind::NodeFail(0)),
            SessionEvent::new(5.0, EventKind::NodeRestore(0)),
            SessionEvent::new(30.0, EventKind::PeriodicTimer),
        ];
        assert_eq!(events[0].to_string(), "12.5 handover 7 3 9");
        assert_eq!(events[7].to_string(), "30 periodic_timer");
        let text = format_trace(&events);
        assert_eq!(parse_trace(&text).unwrap(), events.to_vec());
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_trace("1.0 teleport 3\n").is_err());
        assert!(parse_trace("1.0 join\n").is_err());
        assert!(parse_trace("x join 1\n").is_err());
        assert!(matches!(
            parse_trace("# c\n1 join 1\n2 join x\n"),
            Err(SessionError::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn membership_transitions() {
        let mut st = NetworkState::new(square(), &MulticastGroup::new([0], [2]));
        assert!(st.validate(&EventKind::Join(2)).is_err());
        st.apply(&EventKind::Join(3)).unwrap();
        assert_eq!(st.group().receivers(), &[2, 3]);
        st.apply(&EventKind::Handover { member: 3, from: 3, to: 1 }).unwrap();
        assert_eq!(st.group().receivers(), &[1, 2]);
        assert!(st
            .validate(&EventKind::Handover { member: 3, from: 3, to: 0 })
            .is_err());
        st.apply(&EventKind::Leave(3)).unwrap();
        st.apply(&EventKind::Leave(2)).unwrap();
        assert!(st.group().receivers().is_empty());
        assert!(st.validate(&EventKind::Leave(2)).is_err());
    }

    #[test]
    fn failures_shape_live_graph() {
        let mut st = NetworkState::new(square(), &MulticastGroup::new([0], [2]));
        st.apply(&EventKind::LinkFail(1, 0)).unwrap();
        assert!(st.validate(&EventKind::LinkFail(0, 1)).is_err());
        let g = st.live_graph();
        assert!(!g.has_edge(0, 1) && !g.has_edge(1, 0));
        st.apply(&EventKind::NodeFail(3)).unwrap();
        assert_eq!(st.live_graph().edge_count(), 2);
        assert!(st.validate(&EventKind::Join(3)).is_err());
        st.apply(&EventKind::NodeRestore(3)).unwrap();
        st.apply(&EventKind::LinkRestore(0, 1)).unwrap();
        assert_eq!(st.live_graph(), square());
        assert!(st.validate(&EventKind::LinkFail(0, 2)).is_err());
    }
}
