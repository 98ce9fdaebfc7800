//! Domain vocabulary: assets, partitions, values, metadata items and audit
//! records.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::de::{self, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ModelError;

/// Opaque URI identifying a data asset. Compared byte for byte.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct AssetId(String);

impl AssetId {
    pub fn new(uri: impl Into<String>) -> Result<Self, ModelError> {
        let uri = uri.into();
        if uri.is_empty() {
            return Err(ModelError::InvalidAssetId("asset id is empty".to_owned()));
        }
        if uri.chars().any(char::is_control) {
            return Err(ModelError::InvalidAssetId(format!("asset id {uri:?} contains control characters")));
        }
        Ok(Self(uri))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for AssetId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        AssetId::new(raw).map_err(de::Error::custom)
    }
}

/// The seven partitions of the 5W1H+R mental model. There is deliberately no
/// catch-all member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Partition {
    Who,
    What,
    When,
    Why,
    Where,
    How,
    Relationship,
}

impl Partition {
    /// All partitions in declaration order.
    pub const ALL: [Partition; 7] = [
        Partition::Who,
        Partition::What,
        Partition::When,
        Partition::Why,
        Partition::Where,
        Partition::How,
        Partition::Relationship,
    ];

    /// The six single-asset profiles (everything except `Relationship`).
    pub const PROFILES: [Partition; 6] =
        [Partition::Who, Partition::What, Partition::When, Partition::Why, Partition::Where, Partition::How];

    pub const fn as_str(self) -> &'static str {
        match self {
            Partition::Who => "Who",
            Partition::What => "What",
            Partition::When => "When",
            Partition::Why => "Why",
            Partition::Where => "Where",
            Partition::How => "How",
            Partition::Relationship => "Relationship",
        }
    }

    pub const fn is_profile(self) -> bool {
        !matches!(self, Partition::Relationship)
    }

    /// Position in declaration order, used for deterministic tie-breaking.
    pub const fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parse a partition name, ignoring ASCII case.
pub fn parse_partition(name: &str) -> Result<Partition, ModelError> {
    Partition::ALL
        .into_iter()
        .find(|p| p.as_str().eq_ignore_ascii_case(name))
        .ok_or_else(|| ModelError::UnknownPartition(name.to_owned()))
}

impl FromStr for Partition {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_partition(s)
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        parse_partition(&raw).map_err(de::Error::custom)
    }
}

/// A metadata value: any JSON-shaped tree. Integers and floats are kept apart
/// so that integers survive a round trip exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    List(Vec<Value>),
    Map(BTreeMap<String, Value>),
}

impl Value {
    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Int(i) => Some(i as f64),
            Value::Float(f) => Some(f),
            _ => None,
        }
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        match self {
            Value::Map(m) => m.get(key),
            _ => None,
        }
    }

    /// Visit every text leaf (map keys are not leaves).
    pub fn text_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Value::Text(s) => out.push(s),
            Value::List(items) => items.iter().for_each(|v| v.text_leaves(out)),
            Value::Map(m) => m.values().for_each(|v| v.text_leaves(out)),
            _ => {}
        }
    }

    /// Parse interchange text into a value. Rejects numbers outside the
    /// 64-bit range.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::MalformedValue(e.to_string()))
    }

    /// Canonical interchange text (map keys sorted).
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| "null".to_owned())
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_owned())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<f64> for Value {
    fn from(f: f64) -> Self {
        Value::Float(f)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Null => serializer.serialize_unit(),
            Value::Bool(b) => serializer.serialize_bool(*b),
            Value::Int(i) => serializer.serialize_i64(*i),
            Value::Float(f) => serializer.serialize_f64(*f),
            Value::Text(s) => serializer.serialize_str(s),
            Value::List(items) => items.serialize(serializer),
            Value::Map(m) => m.serialize(serializer),
        }
    }
}

struct ValueVisitor;

impl<'de> Visitor<'de> for ValueVisitor {
    type Value = Value;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a JSON value")
    }

    fn visit_unit<E>(self) -> Result<Value, E> {
        Ok(Value::Null)
    }

    fn visit_none<E>(self) -> Result<Value, E> {
        Ok(Value::Null)
    }

    fn visit_some<D: Deserializer<'de>>(self, d: D) -> Result<Value, D::Error> {
        Value::deserialize(d)
    }

    fn visit_bool<E>(self, b: bool) -> Result<Value, E> {
        Ok(Value::Bool(b))
    }

    fn visit_i64<E>(self, i: i64) -> Result<Value, E> {
        Ok(Value::Int(i))
    }

    fn visit_u64<E: de::Error>(self, u: u64) -> Result<Value, E> {
        i64::try_from(u).map(Value::Int).map_err(|_| E::custom(format!("integer {u} exceeds the signed 64-bit range")))
    }

    fn visit_f64<E>(self, f: f64) -> Result<Value, E> {
        Ok(Value::Float(f))
    }

    fn visit_str<E>(self, s: &str) -> Result<Value, E> {
        Ok(Value::Text(s.to_owned()))
    }

    fn visit_string<E>(self, s: String) -> Result<Value, E> {
        Ok(Value::Text(s))
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Value, A::Error> {
        let mut items = Vec::new();
        while let Some(v) = seq.next_element()? {
            items.push(v);
        }
        Ok(Value::List(items))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Value, A::Error> {
        let mut out = BTreeMap::new();
        while let Some((k, v)) = map.next_entry::<String, Value>()? {
            if out.contains_key(&k) {
                return Err(de::Error::custom(format!("duplicate map key {k:?}")));
            }
            out.insert(k, v);
        }
        Ok(Value::Map(out))
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(ValueVisitor)
    }
}

/// One problem found by [`validate_value`], located by a JSONPath-like path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Check that a value can be written to the interchange format and read back
/// unchanged. The only way to fail is a non-finite float.
pub fn validate_value(value: &Value) -> Result<(), Vec<Violation>> {
    fn walk(v: &Value, path: &mut String, out: &mut Vec<Violation>) {
        match v {
            Value::Float(f) if !f.is_finite() => out
                .push(Violation { path: path.clone(), message: format!("non-finite number {f} is not representable") }),
            Value::List(items) => {
                for (i, item) in items.iter().enumerate() {
                    let len = path.len();
                    path.push_str(&format!("[{i}]"));
                    walk(item, path, out);
                    path.truncate(len);
                }
            }
            Value::Map(m) => {
                for (k, item) in m {
                    let len = path.len();
                    path.push('.');
                    path.push_str(k);
                    walk(item, path, out);
                    path.truncate(len);
                }
            }
            _ => {}
        }
    }

    let mut out = Vec::new();
    walk(value, &mut String::from("$"), &mut out);
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AuditOp {
    Set,
    Get,
    Supersede,
    Relate,
}

impl AuditOp {
    pub const fn as_str(self) -> &'static str {
        match self {
            AuditOp::Set => "Set",
            AuditOp::Get => "Get",
            AuditOp::Supersede => "Supersede",
            AuditOp::Relate => "Relate",
        }
    }

    pub const fn is_write(self) -> bool {
        !matches!(self, AuditOp::Get)
    }
}

impl FromStr for AuditOp {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [AuditOp::Set, AuditOp::Get, AuditOp::Supersede, AuditOp::Relate]
            .into_iter()
            .find(|op| op.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownAuditOp(s.to_owned()))
    }
}

impl fmt::Display for AuditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Who did what, and when (UTC nanoseconds since the Unix epoch).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub actor: String,
    pub op: AuditOp,
    pub timestamp: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// A single versioned key:value fact about one asset, in one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataItem {
    pub asset: AssetId,
    pub partition: Partition,
    pub key: String,
    pub value: Value,
    pub version: u32,
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superseded_by: Option<u32>,
    pub audit: AuditRecord,
}

impl MetadataItem {
    pub fn is_superseded(&self) -> bool {
        self.superseded_by.is_some()
    }
}

pub(crate) fn check_actor(actor: &str) -> Result<(), ModelError> {
    if actor.trim().is_empty() {
        Err(ModelError::EmptyActor)
    } else {
        Ok(())
    }
}

pub(crate) fn check_key(key: &str) -> Result<(), ModelError> {
    if key.is_empty() {
        Err(ModelError::EmptyKey)
    } else {
        Ok(())
    }
}

/// Serialize anything to the canonical interchange text: UTF-8 JSON with
/// every object's keys in lexicographic order.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String, serde_json::Error> {
    // serde_json's Map is a BTreeMap without `preserve_order`, so going
    // through the dynamic tree sorts struct fields as well.
    let tree = serde_json::to_value(value)?;
    serde_json::to_string(&tree)
}
