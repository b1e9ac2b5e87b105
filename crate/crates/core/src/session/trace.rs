use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::event::{EventKind, NetworkState, SessionEvent};
use crate::graph::{Graph, NodeId};
use crate::metrics::MulticastGroup;

/// Poisson rates (events per unit time) of a synthetic session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceParams {
    pub duration: f64,
    pub join_rate: f64,
    pub leave_rate: f64,
    /// Per unit of mobility; the effective rate is this times `mobility_speed_proxy`.
    pub handover_rate: f64,
    pub mobility_speed_proxy: f64,
    pub link_fail_rate: f64,
    pub node_fail_rate: f64,
    /// Mean of the exponential repair time after a failure.
    pub mean_repair_time: f64,
    /// Periodic timer events at `k * timer_period`; `None` disables them.
    pub timer_period: Option<f64>,
}

impl Default for TraceParams {
    fn default() -> Self {
        Self {
            duration: 100.0,
            join_rate: 0.05,
            leave_rate: 0.05,
            handover_rate: 0.1,
            mobility_speed_proxy: 1.0,
            link_fail_rate: 0.05,
            node_fail_rate: 0.01,
            mean_repair_time: 5.0,
            timer_period: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Spontaneous {
    Join,
    Leave,
    Handover,
    LinkFail,
    NodeFail,
}

const KINDS: [Spontaneous; 5] = [
    Spontaneous::Join,
    Spontaneous::Leave,
    Spontaneous::Handover,
    Spontaneous::LinkFail,
    Spontaneous::NodeFail,
];

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Arrival times of a Poisson process on `[0, duration]`. Gaps are unit
/// exponentials divided by `rate`, so the same seed gives time-scaled
/// arrivals for different rates.
fn arrivals(rng: &mut ChaCha8Rng, rate: f64, duration: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if rate.is_nan() || rate <= 0.0 {
        return out;
    }
    let mut t = 0.0;
    loop {
        let gap: f64 = rng.sample(Exp1);
        t += gap / rate;
        if t > duration {
            return out;
        }
        out.push(t);
    }
}

/// Draws a valid session trace for `g0` and `grp0`.
///
/// Each event kind is an independent Poisson stream with its own RNG
/// stream. Arguments are drawn uniformly among the choices valid at that
/// moment; an arrival with no valid choice is dropped. Failures never hit a
/// member's attachment node, the last receiver never leaves, and every
/// failure schedules a restore after an exponential repair time.
pub fn generate_trace(g0: &Graph, grp0: &MulticastGroup, params: &TraceParams, seed: u64) -> Vec<SessionEvent> {
    let rates = [
        params.join_rate,
        params.leave_rate,
        params.handover_rate * params.mobility_speed_proxy,
        params.link_fail_rate,
        params.node_fail_rate,
    ];
    let mut pending: Vec<(f64, Spontaneous)> = Vec::new();
    let mut arg_rngs: Vec<ChaCha8Rng> = Vec::new();
    for (i, (&kind, &rate)) in KINDS.iter().zip(&rates).enumerate() {
        let mut times_rng = stream(seed, 2 * i as u64 + 1);
        pending.extend(arrivals(&mut times_rng, rate, params.duration).into_iter().map(|t| (t, kind)));
        arg_rngs.push(stream(seed, 2 * i as u64 + 2));
    }
    pending.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut timers: Vec<f64> = Vec::new();
    if let Some(period) = params.timer_period.filter(|p| *p > 0.0) {
        let mut k = 1.0;
        while k * period <= params.duration {
            timers.push(k * period);
            k += 1.0;
        }
    }

    let mut net = NetworkState::new(g0.clone(), grp0);
    let mut scheduled = Scheduled::default();
    for t in timers {
        scheduled.push(t, EventKind::PeriodicTimer);
    }
    let mut out = Vec::new();
    for (t, kind) in pending {
        scheduled.drain_until(t, &mut net, &mut out);
        let rng = &mut arg_rngs[kind as usize];
        let Some(ev) = draw(&net, kind, rng) else {
            continue;
        };
        let restore = match ev {
            EventKind::LinkFail(u, v) => Some(EventKind::LinkRestore(u, v)),
            EventKind::NodeFail(n) => Some(EventKind::NodeRestore(n)),
            _ => None,
        };
        if let Some(r) = restore {
            let repair: f64 = rng.sample(Exp1);
            let rt = t + repair * params.mean_repair_time;
            if rt <= params.duration {
                scheduled.push(rt, r);
            }
        }
        net.apply(&ev).expect("drawn from valid choices");
        out.push(SessionEvent::new(t, ev));
    }
    scheduled.drain_until(f64::INFINITY, &mut net, &mut out);
    out
}

/// Restores and timers, released in time order (then insertion order).
#[derive(Default)]
struct Scheduled {
    heap: BinaryHeap<Reverse<(OrdF64, usize)>>,
    events: Vec<EventKind>,
}

impl Scheduled {
    fn push(&mut self, t: f64, kind: EventKind) {
        self.heap.push(Reverse((OrdF64(t), self.events.len())));
        self.events.push(kind);
    }

    fn drain_until(&mut self, t: f64, net: &mut NetworkState, out: &mut Vec<SessionEvent>) {
        while let Some(&Reverse((OrdF64(at), idx))) = self.heap.peek() {
            if at > t {
                break;
            }
            self.heap.pop();
            let kind = self.events[idx];
            net.apply(&kind).expect("scheduled events stay valid");
            out.push(SessionEvent::new(at, kind));
        }
    }
}

/// Total order wrapper for finite times.
#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn draw(net: &NetworkState, kind: Spontaneous, rng: &mut ChaCha8Rng) -> Option<EventKind> {
    let attached = |v: NodeId| net.members().values().any(|m| m.attach == v);
    match kind {
        Spontaneous::Join => {
            let free: Vec<NodeId> = net
                .alive_nodes()
                .filter(|v| !net.members().get(v).is_some_and(|m| m.receiver))
                .collect();
            free.choose(rng).map(|&v| EventKind::Join(v))
        }
        Spontaneous::Leave => {
            let receivers: Vec<NodeId> = net.receiver_members().map(|(id, _)| id).collect();
            if receivers.len() < 2 {
                return None;
            }
            receivers.choose(rng).map(|&id| EventKind::Leave(id))
        }
        Spontaneous::Handover => {
            let ids: Vec<NodeId> = net.members().keys().copied().collect();
            let &member = ids.choose(rng)?;
            let from = net.members()[&member].attach;
            let near: Vec<NodeId> = net
                .base()
                .neighbors(from)
                .map(|(v, _)| v)
                .filter(|&v| v != from && net.is_alive(v))
                .collect();
            let to = match near.choose(rng) {
                Some(&v) => v,
                None => {
                    let any: Vec<NodeId> = net.alive_nodes().filter(|&v| v != from).collect();
                    *any.choose(rng)?
                }
            };
            Some(EventKind::Handover { member, from, to })
        }
        Spontaneous::LinkFail => {
            let up: Vec<(NodeId, NodeId)> = net
                .base_links()
                .into_iter()
                .filter(|&(u, v)| !net.is_link_failed(u, v))
                .collect();
            up.choose(rng).map(|&(u, v)| EventKind::LinkFail(u, v))
        }
        Spontaneous::NodeFail => {
            let spare: Vec<NodeId> = net.alive_nodes().filter(|&v| !attached(v)).collect();
            spare.choose(rng).map(|&v| EventKind::NodeFail(v))
        }
    }
}
