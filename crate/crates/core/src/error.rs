use crate::graph::VertexId;

/// Errors produced across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("duplicate edge {0} -- {1}")]
    DuplicateEdge(VertexId, VertexId),
    #[error("edge {0} -- {1} listed twice with different weights")]
    NonSymmetricWeight(VertexId, VertexId),
    #[error("edge {u} -- {v} has non-positive weight {w}")]
    NonPositiveWeight { u: VertexId, v: VertexId, w: f64 },
    #[error("vertex {0} has non-positive measure {1}")]
    NonPositiveMeasure(VertexId, f64),
    #[error("graph is not connected ({reached} of {total} vertices reachable)")]
    Disconnected { reached: usize, total: usize },
    #[error("self-loop at {0}")]
    SelfLoop(VertexId),
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("no edge weight for {0} -- {1}")]
    MissingEdgeWeight(VertexId, VertexId),
    #[error("missing function value at {0}")]
    MissingValue(VertexId),
    #[error("truncation too small: {0}")]
    TruncationTooSmall(String),
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("generation overflow: {0}")]
    Overflow(String),
    #[error("regime not covered by the tabulated classifications: {0}")]
    UnclassifiedRegime(String),
    #[error("subdivision plan has no entry for edge {0} -- {1}")]
    PlanIncomplete(VertexId, VertexId),
    #[error("subdivision count {n} < 2 on edge {u} -- {v}")]
    PlanTooSmall { u: VertexId, v: VertexId, n: u32 },
    #[error("only graphs over original vertices can be subdivided (found {0})")]
    NestedSubdivision(VertexId),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("value {t} outside the tabulated range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("time {t} is beyond the recorded end {end}")]
    BeyondRecordedTime { t: f64, end: f64 },
    #[error("trajectory never spends time in the subset")]
    NeverVisitsSubset,
    #[error("singular linear system")]
    SingularSystem,
    #[error("linear system with {0} unknowns exceeds the dense solver limit")]
    SystemTooLarge(usize),
    #[error("hypothesis ({index}) violated: {detail}")]
    HypothesisViolated { index: u8, detail: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
