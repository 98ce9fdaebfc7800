use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::model::{AssetId, Partition, Violation};

fn join_violations(v: &[Violation]) -> String {
    let mut out = String::new();
    for (i, violation) in v.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        out.push_str(&alloc::format!("{violation}"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown partition {0:?}; expected one of Who, What, When, Why, Where, How, Relationship")]
    UnknownPartition(String),
    #[error("invalid asset id: {0}")]
    InvalidAssetId(String),
    #[error("metadata key must not be empty")]
    EmptyKey,
    #[error("actor must not be empty")]
    EmptyActor,
    #[error("malformed value: {0}")]
    MalformedValue(String),
    #[error("invalid value: {}", join_violations(.0))]
    InvalidValue(Vec<Violation>),
    #[error("unknown audit operation {0:?}; expected Set, Get, Supersede or Relate")]
    UnknownAuditOp(String),
}

/// Failures decoding or replaying the record log and snapshots.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogError {
    #[error("corrupt record at byte offset {offset}: {reason}")]
    CorruptRecord { offset: usize, reason: String },
    #[error("record seq {seq} cannot be applied: {reason}")]
    InconsistentRecord { seq: u64, reason: String },
    #[error("snapshot format {found:?} is not supported (expected {expected:?})")]
    SnapshotVersionMismatch { found: String, expected: &'static str },
    #[error("malformed snapshot: {0}")]
    MalformedSnapshot(String),
    #[error("log tail starts at seq {found}, snapshot expects {expected}")]
    TailMismatch { expected: u64, found: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelateError {
    #[error("containment is undefined for an empty left column")]
    EmptyLeftColumn,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Relate(#[from] RelateError),
    #[error("unknown asset {0}")]
    UnknownAsset(AssetId),
    #[error("the Relationship partition is written and read through relationships, not profiles")]
    RelationshipPartitionMisuse,
    #[error("no metadata item {asset} / {partition} / {key:?}{}", .version.map(|v| alloc::format!(" version {v}")).unwrap_or_default())]
    NotFound { asset: AssetId, partition: Partition, key: String, version: Option<u32> },
    #[error("version {version} is already superseded by version {by}")]
    AlreadySuperseded { version: u32, by: u32 },
    #[error("a supersede requires a non-empty reason")]
    MissingReason,
    #[error("search query must not be empty")]
    EmptyQuery,
    #[error("a relationship needs at least 2 endpoints, got {0}")]
    TooFewEndpoints(usize),
    #[error("version selector must be >= 1")]
    InvalidVersion,
    #[error("storage failure: {0}")]
    Storage(String),
    #[error(transparent)]
    Log(#[from] LogError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifyError {
    #[error("unknown criterion label {0:?}")]
    UnknownCriterionLabel(String),
    #[error("question fixture line {line}: {reason}")]
    MalformedFixture { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("distribution has no responses")]
    EmptyDistribution,
    #[error("no responses for mental model {0:?}")]
    NoData(String),
    #[error("no difficulty ratings for {mm} {question}")]
    NoRatings { mm: String, question: String },
    #[error("Mann-Whitney U needs two non-empty samples")]
    EmptySample,
    #[error("unknown mental model {0:?}")]
    UnknownMentalModel(String),
    #[error("invalid mental model: {0}")]
    InvalidMentalModel(String),
}

/// Rejections while ingesting survey responses. `line` is 1-based and
/// counts the header.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: unknown mental model {name:?}")]
    UnknownMentalModel { line: usize, name: String },
    #[error("line {line}: choice {choice:?} is not a partition of {mm} (or None)")]
    ChoiceNotInModel { line: usize, choice: String, mm: String },
}
