//! Dynamic multicast sessions: membership churn, handovers and failures
//! replayed against an RP that is reselected by a recovery policy.

mod event;
mod trace;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use event::{format_trace, parse_trace, EventKind, Member, MemberId, NetworkState, SessionEvent};
pub use trace::{generate_trace, TraceParams};

use crate::graph::{Graph, NodeId};
use crate::metrics::{
    FitnessWeights, MulticastGroup, MulticastTree, QosBounds, RpInstance, TreeEvaluation,
};
use crate::selectors::{bootstrap_rp, select, Algorithm, InitialSolution, VnsConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("trace line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("event {index} at t={time}: {reason}")]
    Malformed { index: usize, time: f64, reason: String },
    #[error("invalid initial group: {0}")]
    InvalidGroup(String),
}

/// When to rerun the selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryConfig {
    /// Period of the reselection timer; timers at `k * period` are merged
    /// into the replayed trace. `None` disables them.
    pub period: Option<f64>,
    /// Reselect on change events when the current fitness has degraded.
    pub event_driven: bool,
    /// Relative fitness degradation, against the fitness right after the
    /// last selection, that triggers an event-driven reselection.
    pub degradation_threshold: f64,
    /// Time a disrupted receiver spends without service.
    pub recovery_delay: f64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            period: None,
            event_driven: true,
            degradation_threshold: 0.1,
            recovery_delay: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Keep,
    /// `forced` when the RP is dead or a member lost its path.
    Reselect { forced: bool },
}

/// Network state plus the current RP and its evaluation.
#[derive(Debug, Clone)]
pub struct SessionState {
    net: NetworkState,
    live: Graph,
    group: MulticastGroup,
    bounds: QosBounds,
    weights: FitnessWeights,
    rp: NodeId,
    eval: Option<TreeEvaluation>,
    reference: Option<f64>,
    clock: f64,
}

impl SessionState {
    pub fn new(
        g0: &Graph,
        grp0: &MulticastGroup,
        bounds: QosBounds,
        weights: FitnessWeights,
        rp: NodeId,
    ) -> Self {
        let net = NetworkState::new(g0.clone(), grp0);
        let mut st = Self {
            live: net.live_graph(),
            group: net.group(),
            net,
            bounds,
            weights,
            rp,
            eval: None,
            reference: None,
            clock: 0.0,
        };
        st.set_rp(rp);
        st
    }

    pub fn network(&self) -> &NetworkState {
        &self.net
    }

    pub fn live_graph(&self) -> &Graph {
        &self.live
    }

    pub fn group(&self) -> &MulticastGroup {
        &self.group
    }

    pub fn rp(&self) -> NodeId {
        self.rp
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// Evaluation of the current tree; `None` when it cannot be built.
    pub fn current_eval(&self) -> Option<&TreeEvaluation> {
        self.eval.as_ref()
    }

    pub fn fitness(&self) -> Option<f64> {
        self.eval.map(|e| e.fitness)
    }

    /// Fitness recorded right after the last selection.
    pub fn reference_fitness(&self) -> Option<f64> {
        self.reference
    }

    fn instance(&self) -> RpInstance<'_> {
        RpInstance::new(&self.live, &self.group, self.bounds)
            .with_weights(self.weights)
            .with_candidates(self.net.alive_nodes())
    }

    pub fn tree(&self) -> Option<MulticastTree> {
        if !self.net.is_alive(self.rp) {
            return None;
        }
        self.instance().tree(self.rp).ok()
    }

    fn refresh(&mut self) {
        self.eval = if self.net.is_alive(self.rp) {
            self.instance().evaluate(self.rp).ok()
        } else {
            None
        };
    }

    /// Installs `rp` and makes its fitness the new reference.
    pub fn set_rp(&mut self, rp: NodeId) {
        self.rp = rp;
        self.refresh();
        self.reference = self.fitness();
    }

    /// Applies one event and re-evaluates the current RP on the new state.
    pub fn apply_event(&mut self, ev: &SessionEvent) -> Result<(), String> {
        if ev.time.is_nan() || ev.time < self.clock {
            return Err(format!("time {} precedes clock {}", ev.time, self.clock));
        }
        self.net.apply(&ev.kind)?;
        self.clock = ev.time;
        self.live = self.net.live_graph();
        self.group = self.net.group();
        self.refresh();
        Ok(())
    }
}

/// Decides whether the selector reruns after `ev` has been applied to `st`.
pub fn recovery_policy(st: &SessionState, ev: &SessionEvent, pol: &RecoveryConfig) -> Decision {
    if !st.network().is_alive(st.rp()) {
        return Decision::Reselect { forced: true };
    }
    if !st.group().is_complete() {
        return Decision::Keep;
    }
    let Some(current) = st.fitness() else {
        return Decision::Reselect { forced: true };
    };
    match ev.kind {
        EventKind::PeriodicTimer => Decision::Reselect { forced: false },
        _ if !pol.event_driven => Decision::Keep,
        _ => match st.reference_fitness() {
            Some(r) if current <= r * (1.0 + pol.degradation_threshold) => Decision::Keep,
            _ => Decision::Reselect { forced: false },
        },
    }
}

/// Selector and scoring used throughout a session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSetup {
    pub algorithm: Algorithm,
    pub search: VnsConfig,
    pub bounds: QosBounds,
    pub weights: FitnessWeights,
    pub policy: RecoveryConfig,
}

impl SessionSetup {
    pub fn new(algorithm: Algorithm, search: VnsConfig, bounds: QosBounds) -> Self {
        Self {
            algorithm,
            search,
            bounds,
            weights: FitnessWeights::default(),
            policy: RecoveryConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    /// `(time, fitness)` at the start and after every event with a buildable tree.
    pub fitness_trajectory: Vec<(f64, f64)>,
    pub reselections: usize,
    pub selector_invocations: usize,
    /// Receiver-time lost to failures and handovers.
    pub disruption_units: f64,
    /// Per handover, hops from the new attachment to the existing tree.
    pub handover_latency_proxy: Vec<usize>,
    pub final_rp: NodeId,
    pub events: usize,
}

impl SessionMetrics {
    pub fn mean_fitness(&self) -> f64 {
        mean(self.fitness_trajectory.iter().map(|&(_, f)| f))
    }

    pub fn mean_handover_latency(&self) -> f64 {
        mean(self.handover_latency_proxy.iter().map(|&h| h as f64))
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn invocation_seed(seed: u64, invocation: usize) -> u64 {
    seed ^ (invocation as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs the selector on the live state. A selector failure falls back to the
/// current RP if it is alive, else to a hash-chosen live node.
fn run_selector(st: &SessionState, setup: &SessionSetup, invocation: usize, warm: Option<NodeId>) -> NodeId {
    let inst = st.instance();
    let mut cfg = setup.search.clone();
    cfg.rng_seed = invocation_seed(cfg.rng_seed, invocation);
    if let Some(rp) = warm {
        cfg.initial = InitialSolution::Given(rp);
    }
    match select(setup.algorithm, &inst, &cfg) {
        Ok(r) => r.rp,
        Err(_) if st.network().is_alive(st.rp()) => st.rp(),
        Err(_) => bootstrap_rp(&inst, cfg.rng_seed).unwrap_or(st.rp()),
    }
}

/// Receivers that lose service when `kind` takes effect on `tree`.
fn disrupted_receivers(st: &SessionState, tree: &MulticastTree, kind: &EventKind) -> usize {
    let hit = |p: &crate::graph::Path| match *kind {
        EventKind::LinkFail(u, v) => p.uses_link(u, v),
        EventKind::NodeFail(n) => p.contains_node(n),
        _ => false,
    };
    let all = tree.source_paths.values().any(hit);
    st.network()
        .receiver_members()
        .filter(|(_, m)| all || tree.receiver_paths.get(&m.attach).is_some_and(hit))
        .count()
}

/// Hops from `to` to the nearest node of `tree` other than the moving
/// member's old branch, along the new least-delay path.
fn graft_hops(st: &SessionState, old: &MulticastTree, member: &Member, from: NodeId, to: NodeId) -> Option<usize> {
    let shared_at_from = st
        .network()
        .members()
        .values()
        .filter(|m| m.attach == from && m.receiver)
        .count()
        > 0;
    let mut on_tree: BTreeSet<NodeId> = BTreeSet::from([old.rp]);
    for (&d, p) in &old.receiver_paths {
        if d != from || shared_at_from {
            on_tree.extend(p.nodes.iter().copied());
        }
    }
    if member.receiver {
        let path = st.live_graph().shortest_delay_path(old.rp, to)?;
        let last = path.nodes.iter().rposition(|v| on_tree.contains(v))?;
        return Some(path.nodes.len() - 1 - last);
    }
    for (&s, p) in &old.source_paths {
        if s != from {
            on_tree.extend(p.nodes.iter().copied());
        }
    }
    let path = st.live_graph().shortest_delay_path(to, old.rp)?;
    path.nodes.iter().position(|v| on_tree.contains(v))
}

fn merged_events(trace: &[SessionEvent], pol: &RecoveryConfig) -> Vec<SessionEvent> {
    let mut out = trace.to_vec();
    let horizon = trace.last().map_or(0.0, |e| e.time);
    if let Some(period) = pol.period.filter(|p| *p > 0.0) {
        let mut k = 1.0;
        while k * period <= horizon {
            out.push(SessionEvent::new(k * period, EventKind::PeriodicTimer));
            k += 1.0;
        }
        // Stable: trace events precede timers at the same instant.
        out.sort_by(|a, b| a.time.total_cmp(&b.time));
    }
    out
}

/// Checks the trace against the initial state without running a selector.
pub fn validate_trace(g0: &Graph, grp0: &MulticastGroup, trace: &[SessionEvent]) -> Result<(), SessionError> {
    grp0.validate(g0).map_err(SessionError::InvalidGroup)?;
    let mut net = NetworkState::new(g0.clone(), grp0);
    let mut clock = 0.0;
    for (index, ev) in trace.iter().enumerate() {
        let bad = |reason: String| SessionError::Malformed {
            index,
            time: ev.time,
            reason,
        };
        if !ev.time.is_finite() || ev.time < clock {
            return Err(bad(format!("time must be finite and at least {clock}")));
        }
        clock = ev.time;
        net.apply(&ev.kind).map_err(bad)?;
    }
    Ok(())
}

/// Replays `trace` from the initial topology and group.
pub fn run_session(
    g0: &Graph,
    grp0: &MulticastGroup,
    trace: &[SessionEvent],
    setup: &SessionSetup,
) -> Result<SessionMetrics, SessionError> {
    validate_trace(g0, grp0, trace)?;
    let pol = &setup.policy;

    let mut st = SessionState::new(g0, grp0, setup.bounds, setup.weights, 0);
    let rp = run_selector(&st, setup, 0, None);
    st.set_rp(rp);
    let mut invocations = 1;
    let mut m = SessionMetrics {
        fitness_trajectory: st.fitness().map(|f| (0.0, f)).into_iter().collect(),
        reselections: 0,
        selector_invocations: 0,
        disruption_units: 0.0,
        handover_latency_proxy: Vec::new(),
        final_rp: rp,
        events: 0,
    };

    for (index, ev) in merged_events(trace, pol).iter().enumerate() {
        let old_tree = st.tree();
        let moving = match ev.kind {
            EventKind::Handover { member, .. } => st.network().members().get(&member).copied(),
            _ => None,
        };
        if let Some(tree) = &old_tree {
            if ev.kind.is_failure() {
                m.disruption_units += disrupted_receivers(&st, tree, &ev.kind) as f64 * pol.recovery_delay;
            }
        }
        if let Some(mv) = moving {
            let receivers = st.network().receiver_members().count();
            let affected = usize::from(mv.receiver) + if mv.source { receivers } else { 0 };
            m.disruption_units += affected as f64 * pol.recovery_delay;
        }

        st.apply_event(ev).map_err(|reason| SessionError::Malformed {
            index,
            time: ev.time,
            reason,
        })?;
        m.events += 1;

        if let (Some(tree), Some(mv), EventKind::Handover { from, to, .. }) = (&old_tree, moving, ev.kind) {
            if let Some(h) = graft_hops(&st, tree, &mv, from, to) {
                m.handover_latency_proxy.push(h);
            }
        }

        if let Decision::Reselect { .. } = recovery_policy(&st, ev, pol) {
            let rp = run_selector(&st, setup, invocations, Some(st.rp()));
            invocations += 1;
            st.set_rp(rp);
        }
        if let Some(f) = st.fitness() {
            m.fitness_trajectory.push((ev.time, f));
        }
    }
    m.selector_invocations = invocations;
    m.reselections = invocations - 1;
    m.final_rp = st.rp();
    Ok(m)
}
