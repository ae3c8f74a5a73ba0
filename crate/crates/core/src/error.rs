use std::path::PathBuf;

use thiserror::Error;

use crate::ids::{NodeId, ShardId};
use crate::time::SimTime;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("event at {event} scheduled before current clock {now}")]
    SchedulingInPast { event: SimTime, now: SimTime },

    #[error("key {key} is not placed on node {node}")]
    UnknownKey { key: u64, node: NodeId },

    #[error("migration rejected: node {node} would hold {records} records, limit {limit}")]
    TargetOverCapacity {
        node: NodeId,
        records: usize,
        limit: usize,
    },

    #[error("migration references unknown shard {0}")]
    UnknownShard(ShardId),

    #[error("invalid migration plan: {0}")]
    InvalidPlan(String),

    #[error("hash ring is empty")]
    EmptyRing,

    #[error("node {0} is already on the ring")]
    DuplicateNode(NodeId),

    #[error("no live nodes")]
    NoLiveNodes,

    #[error("forecast needs at least 2 buckets of history, got {0}")]
    InsufficientHistory(usize),

    #[error("fractal dimension needs at least 2 points and 3 scales")]
    DegenerateInput,

    #[error("trace has no completed requests")]
    EmptyTrace,

    #[error("scalability needs runs at N/4, N/2 and N nodes; missing {0}")]
    MissingRun(&'static str),

    #[error("metric column `{0}` is zero for every strategy")]
    AllZeroColumn(&'static str),

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("invalid value for `{field}`: {reason}")]
    SchemaError { field: String, reason: String },

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("malformed report: {0}")]
    MalformedReport(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn schema(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::SchemaError {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by the user's input rather than the run itself.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::FileNotFound(_)
                | Error::SchemaError { .. }
                | Error::UnknownField(_)
                | Error::MalformedReport(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
