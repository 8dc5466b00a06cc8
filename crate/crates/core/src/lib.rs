//! Macroscopic freeway simulation with service stations.
//!
//! The second-order model ([`metanet::MetanetS`]) couples density and speed
//! dynamics per section with store-and-forward queues, destination-oriented
//! nodes and service stations. [`ctm::CtmS`] is a first-order cell
//! transmission baseline on the same network description.

pub mod builtin;
pub mod ctm;
pub mod demand;
pub mod error;
pub mod freeway;
pub mod metanet;
pub mod network;
pub mod node;
pub mod queue;
pub mod scenario;
pub mod sim;
pub mod station;
pub mod summary;
pub mod trace;

pub use builtin::{build_paper_scenario, builtin};
pub use demand::DemandProfile;
pub use error::{ScenarioError, SimError};
pub use network::{validate, FreewayParams, NetworkSpec, ValidationReport};
pub use sim::{run, run_spec, Model, ModelKind, Network, RunOptions, SimState, StepFlows};
pub use summary::RunSummary;
pub use trace::{CsvTrace, TraceRecord, TraceSink, TRACE_HEADER};
