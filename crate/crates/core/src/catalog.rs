//! Catalog operations: register assets, set/get/supersede profile items,
//! relationships, partition-scoped search and audit trails.
//!
//! A [`Catalog`] owns the materialized [`CatalogState`] and a [`RecordSink`]
//! that persists every record before it is folded into the state. Each write
//! is validated against the state first, so a record that reaches the sink
//! always applies cleanly on replay.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CatalogError, ModelError};
use crate::log::{
    encode_frame, AssetRegistration, ItemWrite, LogRecord, Payload, ReadAudit, ReadTarget, RelationshipWrite,
};
use crate::model::{
    check_actor, check_key, parse_partition, validate_value, AssetId, AuditOp, AuditRecord, MetadataItem, Partition,
    Value,
};
use crate::relate::{ColumnSample, Endpoint, RelationshipRecord, SetOverlap, JACCARD_KEY};
use crate::state::{AuditEntry, CatalogState};

/// Which versions of a key to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VersionSelector {
    #[default]
    Latest,
    All,
    Exact(u32),
}

impl fmt::Display for VersionSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VersionSelector::Latest => f.write_str("latest"),
            VersionSelector::All => f.write_str("all"),
            VersionSelector::Exact(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for VersionSelector {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "latest" => Ok(VersionSelector::Latest),
            "all" => Ok(VersionSelector::All),
            other => match other.parse::<u32>() {
                Ok(0) | Err(_) => Err(CatalogError::InvalidVersion),
                Ok(v) => Ok(VersionSelector::Exact(v)),
            },
        }
    }
}

impl Serialize for VersionSelector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VersionSelector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Where a search looks: one partition or everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchScope {
    Global,
    Partition(Partition),
}

impl SearchScope {
    pub fn includes(self, partition: Partition) -> bool {
        match self {
            SearchScope::Global => true,
            SearchScope::Partition(p) => p == partition,
        }
    }

    pub fn partition(self) -> Option<Partition> {
        match self {
            SearchScope::Global => None,
            SearchScope::Partition(p) => Some(p),
        }
    }
}

impl fmt::Display for SearchScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchScope::Global => f.write_str("global"),
            SearchScope::Partition(p) => f.write_str(p.as_str()),
        }
    }
}

impl FromStr for SearchScope {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("global") {
            Ok(SearchScope::Global)
        } else {
            parse_partition(s).map(SearchScope::Partition)
        }
    }
}

impl Serialize for SearchScope {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SearchScope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchHit {
    Item(MetadataItem),
    Relationship(RelationshipRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub matches: Vec<SearchHit>,
    /// Number of items inspected, i.e. the size of the searched population.
    pub examined_count: usize,
    pub scope: SearchScope,
}

/// Conjunctive filter over audit entries; `None` fields match anything.
/// The time range is inclusive on both ends.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditFilter {
    pub asset: Option<AssetId>,
    pub actor: Option<String>,
    pub op: Option<AuditOp>,
    pub since: Option<u64>,
    pub until: Option<u64>,
}

impl AuditFilter {
    pub fn matches(&self, entry: &AuditEntry) -> bool {
        self.asset.as_ref().is_none_or(|a| entry.assets.contains(a))
            && self.actor.as_deref().is_none_or(|a| entry.record.actor == a)
            && self.op.is_none_or(|op| entry.record.op == op)
            && self.since.is_none_or(|t| entry.record.timestamp >= t)
            && self.until.is_none_or(|t| entry.record.timestamp <= t)
    }
}

/// Durable destination for framed records.
pub trait RecordSink {
    type Error: fmt::Display;

    /// Persist one complete frame. Must not return until the frame is as
    /// durable as the sink promises.
    fn append(&mut self, frame: &[u8]) -> Result<(), Self::Error>;
}

impl RecordSink for Vec<u8> {
    type Error = core::convert::Infallible;

    fn append(&mut self, frame: &[u8]) -> Result<(), Self::Error> {
        self.extend_from_slice(frame);
        Ok(())
    }
}

/// Source of UTC timestamps in nanoseconds.
pub trait Clock {
    fn now(&mut self) -> u64;
}

/// Deterministic clock that advances by a fixed step on every reading.
#[derive(Debug, Clone)]
pub struct StepClock {
    next: u64,
    step: u64,
}

impl StepClock {
    pub fn new(start: u64, step: u64) -> Self {
        Self { next: start, step }
    }
}

impl Default for StepClock {
    fn default() -> Self {
        Self::new(1, 1)
    }
}

impl Clock for StepClock {
    fn now(&mut self) -> u64 {
        let t = self.next;
        self.next += self.step;
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CatalogConfig {
    /// Append a `Get` audit record for every read.
    pub audit_reads: bool,
}

impl Default for CatalogConfig {
    fn default() -> Self {
        Self { audit_reads: true }
    }
}

/// Reference to one stored version of a profile item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemRef {
    pub asset: AssetId,
    pub partition: Partition,
    pub key: String,
    pub version: u32,
}

/// Version and global sequence number assigned to a write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriteReceipt {
    pub version: u32,
    pub seq: u64,
}

pub struct Catalog<S, C> {
    state: CatalogState,
    sink: S,
    clock: C,
    config: CatalogConfig,
}

impl<S: RecordSink, C: Clock> Catalog<S, C> {
    pub fn new(sink: S, clock: C, config: CatalogConfig) -> Self {
        Self::with_state(CatalogState::new(), sink, clock, config)
    }

    /// Resume from recovered state; `sink` must continue the same log.
    pub fn with_state(state: CatalogState, sink: S, clock: C, config: CatalogConfig) -> Self {
        Self { state, sink, clock, config }
    }

    pub fn state(&self) -> &CatalogState {
        &self.state
    }

    pub fn config(&self) -> CatalogConfig {
        self.config
    }

    pub fn sink(&self) -> &S {
        &self.sink
    }

    pub fn sink_mut(&mut self) -> &mut S {
        &mut self.sink
    }

    pub fn into_parts(self) -> (CatalogState, S, C) {
        (self.state, self.sink, self.clock)
    }

    fn audit(&mut self, actor: &str, op: AuditOp, reason: Option<String>) -> AuditRecord {
        let timestamp = self.clock.now().max(self.state.last_timestamp());
        AuditRecord { actor: actor.to_owned(), op, timestamp, reason }
    }

    fn commit(&mut self, payload: Payload) -> Result<u64, CatalogError> {
        let record = LogRecord { seq: self.state.last_seq() + 1, payload };
        self.state.check(&record)?;
        let frame = encode_frame(&record);
        self.sink.append(&frame).map_err(|e| CatalogError::Storage(e.to_string()))?;
        let seq = record.seq;
        self.state.apply_checked(record);
        Ok(seq)
    }

    /// Register an asset. Registering an existing asset is a no-op apart
    /// from the audit record it leaves.
    pub fn register_asset(&mut self, actor: &str, uri: &str, kind: &str) -> Result<AssetId, CatalogError> {
        check_actor(actor)?;
        let asset = AssetId::new(uri)?;
        let audit = self.audit(actor, AuditOp::Set, None);
        self.commit(Payload::AssetRegistration(AssetRegistration {
            asset: asset.clone(),
            kind: kind.to_owned(),
            audit,
        }))?;
        Ok(asset)
    }

    pub fn set_mi(
        &mut self,
        actor: &str,
        asset: &AssetId,
        partition: Partition,
        key: &str,
        value: Value,
    ) -> Result<WriteReceipt, CatalogError> {
        check_actor(actor)?;
        self.state.require_asset(asset)?;
        if !partition.is_profile() {
            return Err(CatalogError::RelationshipPartitionMisuse);
        }
        check_key(key)?;
        validate_value(&value).map_err(ModelError::InvalidValue)?;
        let version = self.state.next_item_version(asset, partition, key);
        let audit = self.audit(actor, AuditOp::Set, None);
        let seq = self.commit(Payload::MetadataItem(ItemWrite {
            asset: asset.clone(),
            partition,
            key: key.to_owned(),
            value,
            version,
            supersedes: None,
            audit,
        }))?;
        Ok(WriteReceipt { version, seq })
    }

    /// Correct a stored version: appends a new version and points the old
    /// one at it. The old value stays readable by exact version.
    pub fn supersede(
        &mut self,
        actor: &str,
        target: &ItemRef,
        new_value: Value,
        reason: &str,
    ) -> Result<WriteReceipt, CatalogError> {
        check_actor(actor)?;
        self.state.require_asset(&target.asset)?;
        if !target.partition.is_profile() {
            return Err(CatalogError::RelationshipPartitionMisuse);
        }
        if reason.trim().is_empty() {
            return Err(CatalogError::MissingReason);
        }
        let old =
            self.state.select(&target.asset, target.partition, &target.key, VersionSelector::Exact(target.version))?;
        if let Some(by) = old[0].superseded_by {
            return Err(CatalogError::AlreadySuperseded { version: target.version, by });
        }
        validate_value(&new_value).map_err(ModelError::InvalidValue)?;
        let version = self.state.next_item_version(&target.asset, target.partition, &target.key);
        let audit = self.audit(actor, AuditOp::Supersede, Some(reason.to_owned()));
        let seq = self.commit(Payload::MetadataItem(ItemWrite {
            asset: target.asset.clone(),
            partition: target.partition,
            key: target.key.clone(),
            value: new_value,
            version,
            supersedes: Some(target.version),
            audit,
        }))?;
        Ok(WriteReceipt { version, seq })
    }

    pub fn get_mi(
        &mut self,
        actor: &str,
        asset: &AssetId,
        partition: Partition,
        key: &str,
        selector: VersionSelector,
    ) -> Result<Vec<MetadataItem>, CatalogError> {
        check_actor(actor)?;
        let items = self.state.select(asset, partition, key, selector)?;
        if self.config.audit_reads {
            let audit = self.audit(actor, AuditOp::Get, None);
            self.commit(Payload::ReadAudit(ReadAudit {
                target: ReadTarget::Item { asset: asset.clone(), partition, key: key.to_owned(), selector },
                audit,
            }))?;
        }
        Ok(items)
    }

    pub fn list_profile(&self, asset: &AssetId, partition: Partition) -> Result<Vec<MetadataItem>, CatalogError> {
        self.state.profile(asset, partition)
    }

    pub fn search(
        &mut self,
        actor: &str,
        query: &str,
        scope: SearchScope,
        all_versions: bool,
    ) -> Result<SearchResult, CatalogError> {
        check_actor(actor)?;
        let result = self.state.search(query, scope, all_versions)?;
        if self.config.audit_reads {
            let audit = self.audit(actor, AuditOp::Get, None);
            self.commit(Payload::ReadAudit(ReadAudit {
                target: ReadTarget::Search { query: query.to_owned(), scope, all_versions },
                audit,
            }))?;
        }
        Ok(result)
    }

    pub fn audit_trail(&self, filter: &AuditFilter) -> Vec<AuditEntry> {
        self.state.audit_trail(filter)
    }

    /// Store a relationship between two or more (asset, partition)
    /// endpoints. Endpoints may mix partitions.
    pub fn create_relationship(
        &mut self,
        actor: &str,
        endpoints: Vec<Endpoint>,
        key: &str,
        value: Value,
    ) -> Result<WriteReceipt, CatalogError> {
        check_actor(actor)?;
        if endpoints.len() < 2 {
            return Err(CatalogError::TooFewEndpoints(endpoints.len()));
        }
        for e in &endpoints {
            self.state.require_asset(&e.asset)?;
        }
        check_key(key)?;
        validate_value(&value).map_err(ModelError::InvalidValue)?;
        let version = self.state.next_relationship_version(&endpoints, key);
        let audit = self.audit(actor, AuditOp::Relate, None);
        let seq = self.commit(Payload::Relationship(RelationshipWrite {
            endpoints,
            key: key.to_owned(),
            value,
            version,
            audit,
        }))?;
        Ok(WriteReceipt { version, seq })
    }

    /// Compute the Jaccard similarity of two columns and, when it reaches
    /// `threshold`, store it as a relationship between their What profiles.
    pub fn profile_and_relate(
        &mut self,
        actor: &str,
        a: &ColumnSample,
        b: &ColumnSample,
        threshold: f64,
    ) -> Result<Option<RelationshipRecord>, CatalogError> {
        self.state.require_asset(&a.asset)?;
        self.state.require_asset(&b.asset)?;
        let overlap = SetOverlap::of(a, b);
        let score = overlap.jaccard();
        if score < threshold {
            return Ok(None);
        }
        let mut value = BTreeMap::new();
        value.insert("score".to_owned(), Value::Float(score));
        value.insert("left_distinct".to_owned(), Value::Int(overlap.left as i64));
        value.insert("right_distinct".to_owned(), Value::Int(overlap.right as i64));
        value.insert("left_column".to_owned(), Value::text(a.column.clone()));
        value.insert("right_column".to_owned(), Value::text(b.column.clone()));
        let endpoints = alloc::vec![
            Endpoint::new(a.asset.clone(), Partition::What),
            Endpoint::new(b.asset.clone(), Partition::What),
        ];
        let receipt = self.create_relationship(actor, endpoints, JACCARD_KEY, Value::Map(value))?;
        Ok(self.state.relationships().iter().rev().find(|r| r.seq == receipt.seq).cloned())
    }

    pub fn find_related(
        &self,
        asset: &AssetId,
        partition: Option<Partition>,
    ) -> Result<Vec<RelationshipRecord>, CatalogError> {
        self.state.related(asset, partition)
    }
}

impl<S, C> fmt::Debug for Catalog<S, C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Catalog")
            .field("last_seq", &self.state.last_seq())
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

/// Convenience: a catalog that keeps its log in memory.
pub type MemoryCatalog = Catalog<Vec<u8>, StepClock>;

impl MemoryCatalog {
    pub fn in_memory(config: CatalogConfig) -> Self {
        Catalog::new(Vec::new(), StepClock::default(), config)
    }

    /// The framed log written so far.
    pub fn log_bytes(&self) -> &[u8] {
        &self.sink
    }
}
