//! Materialized catalog state: the fold of every log record, plus the
//! snapshot codec and replay.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::catalog::{AuditFilter, SearchHit, SearchResult, SearchScope, VersionSelector};
use crate::error::{CatalogError, LogError, ModelError};
use crate::log::{
    decode_log, AssetRegistration, ItemWrite, LogRecord, Payload, ReadTarget, RelationshipWrite, TornTail,
};
use crate::model::{
    canonical_json, check_actor, check_key, validate_value, AssetId, AuditOp, AuditRecord, MetadataItem, Partition,
};
use crate::relate::{Endpoint, RelationshipRecord};

/// Header line of every snapshot.
pub const SNAPSHOT_MAGIC: &str = "W5SNAP1";

type ItemKey = (AssetId, Partition, String);

/// One audit record together with what it was about.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub assets: Vec<AssetId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Partition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(flatten)]
    pub record: AuditRecord,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CatalogState {
    assets: BTreeMap<AssetId, String>,
    index: BTreeMap<ItemKey, Vec<MetadataItem>>,
    relationships: Vec<RelationshipRecord>,
    relationship_versions: BTreeMap<(Vec<Endpoint>, String), u32>,
    audit: Vec<AuditEntry>,
    last_seq: u64,
    last_timestamp: u64,
}

fn inconsistent(seq: u64, reason: impl Into<String>) -> LogError {
    LogError::InconsistentRecord { seq, reason: reason.into() }
}

impl CatalogState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn last_timestamp(&self) -> u64 {
        self.last_timestamp
    }

    pub fn has_asset(&self, asset: &AssetId) -> bool {
        self.assets.contains_key(asset)
    }

    pub fn asset_kind(&self, asset: &AssetId) -> Option<&str> {
        self.assets.get(asset).map(String::as_str)
    }

    pub fn assets(&self) -> impl Iterator<Item = (&AssetId, &str)> {
        self.assets.iter().map(|(a, k)| (a, k.as_str()))
    }

    /// Every stored profile item, all versions, in (asset, partition, key,
    /// version) order.
    pub fn items(&self) -> impl Iterator<Item = &MetadataItem> {
        self.index.values().flatten()
    }

    pub fn item_count(&self) -> usize {
        self.index.values().map(Vec::len).sum()
    }

    pub fn relationships(&self) -> &[RelationshipRecord] {
        &self.relationships
    }

    pub fn audit(&self) -> &[AuditEntry] {
        &self.audit
    }

    /// All versions of one key, oldest first.
    pub fn versions(&self, asset: &AssetId, partition: Partition, key: &str) -> Option<&[MetadataItem]> {
        self.index.get(&(asset.clone(), partition, key.to_owned())).map(Vec::as_slice)
    }

    pub(crate) fn next_item_version(&self, asset: &AssetId, partition: Partition, key: &str) -> u32 {
        self.versions(asset, partition, key).map_or(1, |v| v.len() as u32 + 1)
    }

    pub(crate) fn next_relationship_version(&self, endpoints: &[Endpoint], key: &str) -> u32 {
        self.relationship_versions.get(&(endpoints.to_vec(), key.to_owned())).map_or(1, |v| v + 1)
    }

    pub(crate) fn require_asset(&self, asset: &AssetId) -> Result<(), CatalogError> {
        if self.has_asset(asset) {
            Ok(())
        } else {
            Err(CatalogError::UnknownAsset(asset.clone()))
        }
    }

    /// Versions of a key chosen by `selector`. `Latest` is the newest
    /// version, which can never be superseded.
    pub fn select(
        &self,
        asset: &AssetId,
        partition: Partition,
        key: &str,
        selector: VersionSelector,
    ) -> Result<Vec<MetadataItem>, CatalogError> {
        self.require_asset(asset)?;
        if !partition.is_profile() {
            return Err(CatalogError::RelationshipPartitionMisuse);
        }
        let not_found =
            |version| CatalogError::NotFound { asset: asset.clone(), partition, key: key.to_owned(), version };
        let versions = self.versions(asset, partition, key).ok_or_else(|| not_found(None))?;
        match selector {
            VersionSelector::Latest => Ok(versions.last().cloned().into_iter().collect()),
            VersionSelector::All => Ok(versions.to_vec()),
            VersionSelector::Exact(0) => Err(CatalogError::InvalidVersion),
            VersionSelector::Exact(v) => {
                versions.get(v as usize - 1).cloned().map(|item| alloc::vec![item]).ok_or_else(|| not_found(Some(v)))
            }
        }
    }

    /// Latest version of every key in one profile of one asset, key-sorted.
    pub fn profile(&self, asset: &AssetId, partition: Partition) -> Result<Vec<MetadataItem>, CatalogError> {
        self.require_asset(asset)?;
        if !partition.is_profile() {
            return Err(CatalogError::RelationshipPartitionMisuse);
        }
        let lo = (asset.clone(), partition, String::new());
        Ok(self
            .index
            .range(lo..)
            .take_while(|((a, p, _), _)| a == asset && *p == partition)
            .filter_map(|(_, versions)| versions.last().cloned())
            .collect())
    }

    /// Latest version of every relationship with an endpoint on `asset`
    /// (restricted to `partition` when given), in seq order.
    pub fn related(
        &self,
        asset: &AssetId,
        partition: Option<Partition>,
    ) -> Result<Vec<RelationshipRecord>, CatalogError> {
        self.require_asset(asset)?;
        Ok(self
            .relationships
            .iter()
            .filter(|r| r.touches(asset, partition))
            .filter(|r| self.relationship_versions.get(&(r.endpoints.clone(), r.key.clone())) == Some(&r.version))
            .cloned()
            .collect())
    }

    /// Case-insensitive substring search over keys and text leaves.
    ///
    /// Only items inside `scope` are examined, which is what makes a
    /// partition-scoped lookup cheaper than a global one.
    pub fn search(&self, query: &str, scope: SearchScope, all_versions: bool) -> Result<SearchResult, CatalogError> {
        if query.is_empty() {
            return Err(CatalogError::EmptyQuery);
        }
        let needle = query.to_lowercase();
        let matches = |key: &str, value: &crate::model::Value| {
            if key.to_lowercase().contains(&needle) {
                return true;
            }
            let mut leaves = Vec::new();
            value.text_leaves(&mut leaves);
            leaves.iter().any(|leaf| leaf.to_lowercase().contains(&needle))
        };

        let mut examined = 0usize;
        let mut hits = Vec::new();
        for item in self.items() {
            if !scope.includes(item.partition) || (!all_versions && item.is_superseded()) {
                continue;
            }
            examined += 1;
            if matches(&item.key, &item.value) {
                hits.push(SearchHit::Item(item.clone()));
            }
        }
        if scope.includes(Partition::Relationship) {
            for rel in &self.relationships {
                examined += 1;
                if matches(&rel.key, &rel.value) {
                    hits.push(SearchHit::Relationship(rel.clone()));
                }
            }
        }
        Ok(SearchResult { matches: hits, examined_count: examined, scope })
    }

    pub fn audit_trail(&self, filter: &AuditFilter) -> Vec<AuditEntry> {
        self.audit.iter().filter(|e| filter.matches(e)).cloned().collect()
    }

    /// Validate a record against the current state without changing it.
    pub fn check(&self, record: &LogRecord) -> Result<(), LogError> {
        let seq = record.seq;
        if seq != self.last_seq + 1 {
            return Err(inconsistent(seq, format!("expected seq {}", self.last_seq + 1)));
        }
        let audit = record.payload.audit();
        check_actor(&audit.actor).map_err(|e| inconsistent(seq, e.to_string()))?;
        if audit.timestamp < self.last_timestamp {
            return Err(inconsistent(seq, "timestamp moves backwards"));
        }
        let expect_op = |op: AuditOp| {
            if audit.op == op {
                Ok(())
            } else {
                Err(inconsistent(seq, format!("audit op {} where {} was expected", audit.op, op)))
            }
        };
        let known = |asset: &AssetId| {
            if self.has_asset(asset) {
                Ok(())
            } else {
                Err(inconsistent(seq, format!("unknown asset {asset}")))
            }
        };
        let valid =
            |value| validate_value(value).map_err(|v| inconsistent(seq, ModelError::InvalidValue(v).to_string()));

        match &record.payload {
            Payload::AssetRegistration(_) => expect_op(AuditOp::Set)?,
            Payload::MetadataItem(w) => {
                known(&w.asset)?;
                if !w.partition.is_profile() {
                    return Err(inconsistent(seq, "profile write into the Relationship partition"));
                }
                check_key(&w.key).map_err(|e| inconsistent(seq, e.to_string()))?;
                valid(&w.value)?;
                let expected = self.next_item_version(&w.asset, w.partition, &w.key);
                if w.version != expected {
                    return Err(inconsistent(seq, format!("version {} where {expected} was expected", w.version)));
                }
                match w.supersedes {
                    None => expect_op(AuditOp::Set)?,
                    Some(old) => {
                        expect_op(AuditOp::Supersede)?;
                        if audit.reason.as_deref().is_none_or(|r| r.trim().is_empty()) {
                            return Err(inconsistent(seq, "supersede without a reason"));
                        }
                        let versions = self.versions(&w.asset, w.partition, &w.key).unwrap_or_default();
                        match versions.get((old as usize).wrapping_sub(1)) {
                            None => return Err(inconsistent(seq, format!("supersedes missing version {old}"))),
                            Some(item) if item.is_superseded() => {
                                return Err(inconsistent(seq, format!("version {old} already superseded")))
                            }
                            Some(_) => {}
                        }
                    }
                }
            }
            Payload::Relationship(w) => {
                expect_op(AuditOp::Relate)?;
                if w.endpoints.len() < 2 {
                    return Err(inconsistent(seq, "relationship with fewer than 2 endpoints"));
                }
                for e in &w.endpoints {
                    known(&e.asset)?;
                }
                check_key(&w.key).map_err(|e| inconsistent(seq, e.to_string()))?;
                valid(&w.value)?;
                let expected = self.next_relationship_version(&w.endpoints, &w.key);
                if w.version != expected {
                    return Err(inconsistent(seq, format!("version {} where {expected} was expected", w.version)));
                }
            }
            Payload::ReadAudit(r) => {
                expect_op(AuditOp::Get)?;
                if let ReadTarget::Item { asset, .. } = &r.target {
                    known(asset)?;
                }
            }
        }
        Ok(())
    }

    /// Validate and fold one record into the state.
    pub fn apply(&mut self, record: LogRecord) -> Result<(), LogError> {
        self.check(&record)?;
        self.apply_checked(record);
        Ok(())
    }

    /// Fold a record that already passed [`check`](Self::check).
    pub(crate) fn apply_checked(&mut self, record: LogRecord) {
        let seq = record.seq;
        let entry = match record.payload {
            Payload::AssetRegistration(AssetRegistration { asset, kind, audit }) => {
                self.assets.entry(asset.clone()).or_insert(kind);
                AuditEntry { seq, assets: alloc::vec![asset], partition: None, key: None, record: audit }
            }
            Payload::MetadataItem(ItemWrite { asset, partition, key, value, version, supersedes, audit }) => {
                let versions = self.index.entry((asset.clone(), partition, key.clone())).or_default();
                if let Some(old) = supersedes {
                    versions[old as usize - 1].superseded_by = Some(version);
                }
                versions.push(MetadataItem {
                    asset: asset.clone(),
                    partition,
                    key: key.clone(),
                    value,
                    version,
                    seq,
                    superseded_by: None,
                    audit: audit.clone(),
                });
                AuditEntry {
                    seq,
                    assets: alloc::vec![asset],
                    partition: Some(partition),
                    key: Some(key),
                    record: audit,
                }
            }
            Payload::Relationship(RelationshipWrite { endpoints, key, value, version, audit }) => {
                self.relationship_versions.insert((endpoints.clone(), key.clone()), version);
                let entry = AuditEntry {
                    seq,
                    assets: endpoints.iter().map(|e| e.asset.clone()).collect(),
                    partition: Some(Partition::Relationship),
                    key: Some(key.clone()),
                    record: audit.clone(),
                };
                self.relationships.push(RelationshipRecord { endpoints, key, value, version, seq, audit });
                entry
            }
            Payload::ReadAudit(read) => match read.target {
                ReadTarget::Item { asset, partition, key, .. } => AuditEntry {
                    seq,
                    assets: alloc::vec![asset],
                    partition: Some(partition),
                    key: Some(key),
                    record: read.audit,
                },
                ReadTarget::Search { query, scope, .. } => AuditEntry {
                    seq,
                    assets: Vec::new(),
                    partition: scope.partition(),
                    key: Some(query),
                    record: read.audit,
                },
            },
        };
        self.last_timestamp = entry.record.timestamp;
        self.audit.push(entry);
        self.last_seq = seq;
    }
}

/// Result of replaying a log.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub state: CatalogState,
    /// Set when an incomplete final record was dropped.
    pub torn_tail: Option<TornTail>,
    /// Byte length of the intact prefix of the log.
    pub valid_len: usize,
}

/// Rebuild state from a complete log.
pub fn replay(log: &[u8]) -> Result<Replay, LogError> {
    replay_onto(CatalogState::new(), log)
}

/// Apply the records of `log` that come after `state.last_seq()`.
pub fn replay_onto(mut state: CatalogState, log: &[u8]) -> Result<Replay, LogError> {
    let decoded = decode_log(log)?;
    for record in decoded.records {
        if record.seq <= state.last_seq {
            continue;
        }
        if record.seq != state.last_seq + 1 {
            return Err(LogError::TailMismatch { expected: state.last_seq + 1, found: record.seq });
        }
        state.apply(record)?;
    }
    Ok(Replay { state, torn_tail: decoded.torn_tail, valid_len: decoded.valid_len })
}

#[derive(Serialize, Deserialize)]
struct SnapshotBody {
    last_seq: u64,
    last_timestamp: u64,
    assets: Vec<SnapshotAsset>,
    items: Vec<MetadataItem>,
    relationships: Vec<RelationshipRecord>,
    audit: Vec<AuditEntry>,
}

#[derive(Serialize, Deserialize)]
struct SnapshotAsset {
    asset: AssetId,
    kind: String,
}

/// Serialize state: the `W5SNAP1` header line followed by canonical JSON.
pub fn snapshot(state: &CatalogState) -> Vec<u8> {
    let body = SnapshotBody {
        last_seq: state.last_seq,
        last_timestamp: state.last_timestamp,
        assets: state
            .assets
            .iter()
            .map(|(asset, kind)| SnapshotAsset { asset: asset.clone(), kind: kind.clone() })
            .collect(),
        items: state.items().cloned().collect(),
        relationships: state.relationships.clone(),
        audit: state.audit.clone(),
    };
    let mut out = Vec::from(SNAPSHOT_MAGIC.as_bytes());
    out.push(b'\n');
    out.extend(canonical_json(&body).expect("snapshot serializes").into_bytes());
    out
}

/// Restore a snapshot, then replay the log records after the snapshot
/// point. `tail` may also be the full log; records the snapshot already
/// covers are skipped.
pub fn load_snapshot(bytes: &[u8], tail: &[u8]) -> Result<Replay, LogError> {
    let newline = bytes.iter().position(|&b| b == b'\n').unwrap_or(bytes.len());
    let header = String::from_utf8_lossy(&bytes[..newline]).into_owned();
    if header != SNAPSHOT_MAGIC {
        return Err(LogError::SnapshotVersionMismatch { found: header, expected: SNAPSHOT_MAGIC });
    }
    let body_bytes = bytes.get(newline + 1..).unwrap_or_default();
    let body: SnapshotBody =
        serde_json::from_slice(body_bytes).map_err(|e| LogError::MalformedSnapshot(e.to_string()))?;

    let mut state = CatalogState {
        last_seq: body.last_seq,
        last_timestamp: body.last_timestamp,
        assets: body.assets.into_iter().map(|a| (a.asset, a.kind)).collect(),
        audit: body.audit,
        ..CatalogState::default()
    };
    for item in body.items {
        state.index.entry((item.asset.clone(), item.partition, item.key.clone())).or_default().push(item);
    }
    for rel in &body.relationships {
        let slot = state.relationship_versions.entry((rel.endpoints.clone(), rel.key.clone())).or_insert(0);
        *slot = (*slot).max(rel.version);
    }
    state.relationships = body.relationships;
    replay_onto(state, tail)
}
