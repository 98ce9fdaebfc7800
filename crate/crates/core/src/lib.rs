//! Core engine of a partition-explicit metadata catalog built on the
//! 5W1H+R mental model: every metadata item lives in exactly one of the
//! Who, What, When, Why, Where and How profiles of one asset, or is a
//! relationship between several assets.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! sockets or the wall clock lives in the `w5cat` crate; here the log is a
//! byte stream written through [`catalog::RecordSink`] and time comes from
//! a [`catalog::Clock`].
//!
//! - [`model`]: assets, partitions, values, items, audit records
//! - [`log`] and [`state`]: record framing, replay, snapshots
//! - [`catalog`]: set/get/supersede, search, audit trail, relationships
//! - [`relate`]: Jaccard similarity and containment between columns
//! - [`classify`]: partition decision criteria and a keyword assistant
//! - [`metrics`]: entropy, None analysis, Likert medians, Mann-Whitney U

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod catalog;
pub mod classify;
pub mod error;
pub mod log;
pub mod metrics;
pub mod model;
pub mod relate;
pub mod state;

pub use catalog::{
    AuditFilter, Catalog, CatalogConfig, Clock, ItemRef, MemoryCatalog, RecordSink, SearchHit, SearchResult,
    SearchScope, StepClock, VersionSelector, WriteReceipt,
};
pub use error::{CatalogError, ClassifyError, IngestError, LogError, MetricsError, ModelError, RelateError};
pub use model::{parse_partition, validate_value, AssetId, AuditOp, AuditRecord, MetadataItem, Partition, Value};
pub use relate::{containment, jaccard, ColumnSample, Endpoint, RelationshipRecord};
pub use state::{load_snapshot, replay, snapshot, AuditEntry, CatalogState, Replay};
