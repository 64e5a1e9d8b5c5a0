//! Transmission topology optimization engine.
//!
//! The crate is organised as a three stage pipeline:
//!
//! * [`importer`] turns a [`grid::GridModel`] into an action space (substation
//!   splits and disconnectable branches) plus the base PTDF matrix.
//! * [`dc`] scores candidate topologies under the DC approximation with full
//!   N-1 and busbar-outage screening; [`qd`] drives a batched MapElites search
//!   over those scores.
//! * [`ac`] re-checks promising candidates with a Newton-Raphson AC power flow.
//!
//! [`pipeline`] wires the stages together under a wall-clock budget and writes
//! the operator-facing reports.

pub mod ac;
pub mod dc;
pub mod error;
pub mod genome;
pub mod graph;
pub mod grid;
pub mod importer;
pub mod par;
pub mod pipeline;
pub mod ptdf;
pub mod rng;
pub mod qd;
pub mod topology;

pub use error::{Error, Result};
pub use genome::Genome;
pub use grid::GridModel;
