use std::path::PathBuf;

use crate::ricci::{CirclePackingMetric, FlowReport};

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced anywhere in the flattening pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("degenerate face {face}: {reason}")]
    DegenerateFace { face: usize, reason: String },

    #[error("vertex {vertex} has a vanishing weighted normal")]
    ZeroNormal { vertex: usize },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// The flow ran out of iterations. The partially flowed metric and its
    /// report are carried along so callers can inspect or resume.
    #[error("ricci flow did not converge within {} iterations", .0.report.iterations)]
    MaxItersExceeded(Box<PartialFlow>),

    #[error("metric collapsed at iteration {iteration}: {reason}")]
    MetricCollapse { iteration: usize, reason: String },

    #[error("metric is not flat: max interior curvature {residual:e} exceeds {tolerance:e}")]
    NonConvergedMetric { residual: f64, tolerance: f64 },

    #[error("layout failed at face {face}: {reason}")]
    Layout { face: usize, reason: String },

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("rasterization covered no pixels")]
    EmptyFootprint,

    #[error("malformed MCI data: {0}")]
    Format(String),

    #[error("channel index {index} out of range (image has {count})")]
    ChannelIndex { index: usize, count: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug)]
pub struct PartialFlow {
    pub metric: CirclePackingMetric,
    pub report: FlowReport,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn degenerate(face: usize, reason: impl Into<String>) -> Self {
        Error::DegenerateFace {
            face,
            reason: reason.into(),
        }
    }
}
