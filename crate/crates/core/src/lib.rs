//! Rendezvous-point selection for shared multicast trees under end-to-end
//! delay and delay-variation bounds.
//!
//! The crate covers the graph model and least-delay paths ([`graph`]),
//! Waxman topology generation ([`topology`]), tree scoring ([`metrics`]),
//! the RP selectors ([`selectors`]) and a dynamic-session simulator
//! ([`session`]) with the benchmark harness behind the CLI ([`bench`]).

pub mod bench;
pub mod graph;
pub mod metrics;
pub mod selectors;
pub mod session;
pub mod topology;

pub use graph::{EdgeAttr, Graph, GraphError, NodeId, Path};
pub use metrics::{
    auto_bounds, evaluate, FitnessWeights, MulticastGroup, QosBounds, RpInstance, TreeEvaluation,
};
pub use selectors::{select, Algorithm, SelectError, SelectionResult, VnsConfig};
