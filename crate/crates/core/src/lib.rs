//! Planning pipeline for a millimeter-wave wireless mesh backhaul with
//! multi-radio TDD nodes: topology generation, active link selection,
//! multipath spanning-tree routing, transmission set construction, and
//! cyclic link schedule optimization, tied together by a feedback loop
//! that ejects hard-to-schedule links back into link selection.
//!
//! Phases operate on plain value data and are independently runnable:
//!
//! 1. [`selection`] picks the active link subset under a per-sector fan-out
//!    cap (optionally forcing a bipartite topology).
//! 2. [`routing`] grows multiple disjoint spanning trees from the gateways
//!    and allocates each node a primary path.
//! 3. [`tsgen`] builds maximal conflict-free transmission sets over directed
//!    links under the per-node TX/RX constraint.
//! 4. [`scheduler`] orders the transmission sets to minimize worst-case
//!    primary-path delay.
//!
//! [`pipeline`] orchestrates the four phases plus the feedback loop;
//! [`topogen`] produces random urban test topologies; [`metrics`] turns runs
//! into plot-ready tables.

pub mod error;
pub mod fixtures;
pub mod metrics;
pub mod netmodel;
pub mod pipeline;
pub mod routing;
pub mod scheduler;
pub mod selection;
pub mod topogen;
pub mod tsgen;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
