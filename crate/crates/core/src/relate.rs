//! Relationship metadata: items whose subject is two or more
//! (asset, partition) endpoints, plus the set-overlap extractors that derive
//! What-profile relationships from column contents.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::RelateError;
use crate::model::{AssetId, AuditRecord, Partition, Value};

/// Jaccard score at or above which `profile_and_relate` stores a relationship.
pub const DEFAULT_JACCARD_THRESHOLD: f64 = 0.5;

/// Key under which computed Jaccard relationships are stored.
pub const JACCARD_KEY: &str = "jaccard";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Endpoint {
    pub asset: AssetId,
    pub partition: Partition,
}

impl Endpoint {
    pub fn new(asset: AssetId, partition: Partition) -> Self {
        Self { asset, partition }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationshipRecord {
    pub endpoints: Vec<Endpoint>,
    pub key: String,
    pub value: Value,
    pub version: u32,
    pub seq: u64,
    pub audit: AuditRecord,
}

impl RelationshipRecord {
    pub fn touches(&self, asset: &AssetId, partition: Option<Partition>) -> bool {
        self.endpoints.iter().any(|e| &e.asset == asset && partition.is_none_or(|p| p == e.partition))
    }
}

/// Values of one column of one asset. Duplicates are allowed on input and
/// collapsed for all similarity math.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSample {
    pub asset: AssetId,
    pub column: String,
    pub values: Vec<String>,
}

impl ColumnSample {
    pub fn new(asset: AssetId, column: impl Into<String>, values: Vec<String>) -> Self {
        Self { asset, column: column.into(), values }
    }

    /// Distinct canonicalized values.
    pub fn distinct(&self) -> BTreeSet<String> {
        self.values.iter().map(|v| canonical_cell(v)).collect()
    }
}

/// Canonical text for a cell: surrounding whitespace trimmed, numbers written
/// in one normal form so that `1`, `1.0` and ` 1 ` compare equal.
pub fn canonical_cell(raw: &str) -> String {
    let cell = raw.trim();
    if let Ok(i) = cell.parse::<i64>() {
        return i.to_string();
    }
    if let Ok(f) = cell.parse::<f64>() {
        if f.is_finite() {
            if libm::trunc(f) == f && libm::fabs(f) < 9.0e15 {
                return (f as i64).to_string();
            }
            return Value::Float(f).to_json();
        }
    }
    cell.to_string()
}

/// Cardinalities of two distinct-value sets and their overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetOverlap {
    pub left: usize,
    pub right: usize,
    pub intersection: usize,
}

impl SetOverlap {
    pub fn of(a: &ColumnSample, b: &ColumnSample) -> Self {
        let left = a.distinct();
        let right = b.distinct();
        let intersection = left.intersection(&right).count();
        Self { left: left.len(), right: right.len(), intersection }
    }

    pub fn union(&self) -> usize {
        self.left + self.right - self.intersection
    }

    pub fn jaccard(&self) -> f64 {
        match self.union() {
            0 => 0.0,
            u => self.intersection as f64 / u as f64,
        }
    }

    pub fn containment(&self) -> Result<f64, RelateError> {
        match self.left {
            0 => Err(RelateError::EmptyLeftColumn),
            l => Ok(self.intersection as f64 / l as f64),
        }
    }
}

/// |A ∩ B| / |A ∪ B| over distinct values; 0 when both columns are empty.
pub fn jaccard(a: &ColumnSample, b: &ColumnSample) -> f64 {
    SetOverlap::of(a, b).jaccard()
}

/// Fraction of `a`'s distinct values that also occur in `b`.
pub fn containment(a: &ColumnSample, b: &ColumnSample) -> Result<f64, RelateError> {
    SetOverlap::of(a, b).containment()
}
