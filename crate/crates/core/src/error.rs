use thiserror::Error;

use crate::netmodel::NodeId;

/// Errors shared by all pipeline phases.
#[derive(Debug, Error)]
pub enum Error {
    #[error("azimuth from node {node} is undefined: target shares its xy position")]
    DegenerateAzimuth { node: NodeId },

    #[error("unknown node id {0}")]
    UnknownNode(NodeId),

    #[error("invalid generator config: {0}")]
    InvalidConfig(String),

    #[error("layer {layer}: grid cell {cell} m does not fit the {width}x{height} m area")]
    GridCellTooLarge {
        layer: &'static str,
        cell: f64,
        width: f64,
        height: f64,
    },

    #[error("topology has no gateway node")]
    NoGateway,

    #[error("negative demand {demand} for node {node}")]
    NegativeDemand { node: NodeId, demand: f64 },

    #[error("fan-out bound needs k >= 2 and n >= 2 (got k={k}, n={n})")]
    DegenerateFanout { k: u32, n: usize },

    #[error("no active links incident to a gateway; cannot seed routing stems")]
    NoStems,

    #[error("transmission set round added no new coverage; link {a}-{b} cannot be scheduled")]
    CoverageStalled { a: NodeId, b: NodeId },

    #[error("hop {index} ({tx}->{rx}) never appears in any transmission set")]
    HopNeverScheduled { index: usize, tx: NodeId, rx: NodeId },

    #[error("injection slot {t0} out of range for schedule of length {len}")]
    InjectionOutOfRange { t0: usize, len: usize },

    #[error("schedule order is not a permutation of 0..{expected}")]
    BadScheduleOrder { expected: usize },

    #[error("cannot optimize an empty transmission set collection")]
    EmptySchedule,

    #[error("node {0} has no primary path")]
    NoPrimaryPath(NodeId),
}
