//! Record log framing.
//!
//! Every write becomes one frame: `[u32 length][u32 crc32][payload]`, both
//! integers little-endian, where `payload` is the canonical JSON of a
//! [`LogRecord`] and the CRC covers exactly the payload bytes. A frame cut
//! short at the end of the log (a torn tail) is reported and dropped; a bad
//! frame with intact frames after it is corruption and aborts decoding.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::catalog::{SearchScope, VersionSelector};
use crate::error::LogError;
use crate::model::{canonical_json, AssetId, AuditRecord, Partition, Value};
use crate::relate::Endpoint;

pub const FRAME_HEADER_LEN: usize = 8;

/// Upper bound on a single payload; anything larger is treated as garbage.
pub const MAX_PAYLOAD_LEN: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRegistration {
    pub asset: AssetId,
    pub kind: String,
    pub audit: AuditRecord,
}

/// A profile write: either a fresh `set` or a `supersede` of an older version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemWrite {
    pub asset: AssetId,
    pub partition: Partition,
    pub key: String,
    pub value: Value,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersedes: Option<u32>,
    pub audit: AuditRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationshipWrite {
    pub endpoints: Vec<Endpoint>,
    pub key: String,
    pub value: Value,
    pub version: u32,
    pub audit: AuditRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReadTarget {
    Item { asset: AssetId, partition: Partition, key: String, selector: VersionSelector },
    Search { query: String, scope: SearchScope, all_versions: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadAudit {
    pub target: ReadTarget,
    pub audit: AuditRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    AssetRegistration(AssetRegistration),
    MetadataItem(ItemWrite),
    Relationship(RelationshipWrite),
    ReadAudit(ReadAudit),
}

impl Payload {
    pub fn audit(&self) -> &AuditRecord {
        match self {
            Payload::AssetRegistration(r) => &r.audit,
            Payload::MetadataItem(w) => &w.audit,
            Payload::Relationship(w) => &w.audit,
            Payload::ReadAudit(r) => &r.audit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub payload: Payload,
}

impl LogRecord {
    /// Canonical interchange text of the record, as stored inside a frame.
    pub fn to_canonical_json(&self) -> String {
        // LogRecord only contains strings, integers, finite floats and maps
        // with string keys, so serialization cannot fail.
        canonical_json(self).expect("log record serializes")
    }
}

pub fn encode_frame(record: &LogRecord) -> Vec<u8> {
    let payload = record.to_canonical_json().into_bytes();
    let mut frame = Vec::with_capacity(FRAME_HEADER_LEN + payload.len());
    frame.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    frame.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    frame.extend_from_slice(&payload);
    frame
}

/// An incomplete or damaged final frame that was discarded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TornTail {
    /// Byte offset where the discarded frame starts.
    pub offset: usize,
    pub discarded_bytes: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedLog {
    pub records: Vec<LogRecord>,
    /// Length of the prefix made of intact frames.
    pub valid_len: usize,
    pub torn_tail: Option<TornTail>,
}

pub fn decode_log(bytes: &[u8]) -> Result<DecodedLog, LogError> {
    let mut records = Vec::new();
    let mut offset = 0usize;
    let torn = |offset: usize, reason: String| TornTail { offset, discarded_bytes: bytes.len() - offset, reason };

    while offset < bytes.len() {
        let rest = &bytes[offset..];
        if rest.len() < FRAME_HEADER_LEN {
            let tail = torn(offset, format!("{} header bytes of {FRAME_HEADER_LEN}", rest.len()));
            return Ok(DecodedLog { records, valid_len: offset, torn_tail: Some(tail) });
        }
        let len = u32::from_le_bytes(rest[0..4].try_into().unwrap()) as usize;
        let crc = u32::from_le_bytes(rest[4..8].try_into().unwrap());
        if len > MAX_PAYLOAD_LEN {
            return Err(LogError::CorruptRecord { offset, reason: format!("implausible payload length {len}") });
        }
        let end = FRAME_HEADER_LEN + len;
        if rest.len() < end {
            let tail = torn(offset, format!("payload has {} of {len} bytes", rest.len() - FRAME_HEADER_LEN));
            return Ok(DecodedLog { records, valid_len: offset, torn_tail: Some(tail) });
        }
        let payload = &rest[FRAME_HEADER_LEN..end];
        let is_last = rest.len() == end;
        if crc32fast::hash(payload) != crc {
            if is_last {
                let tail = torn(offset, "checksum mismatch in final record".to_string());
                return Ok(DecodedLog { records, valid_len: offset, torn_tail: Some(tail) });
            }
            return Err(LogError::CorruptRecord { offset, reason: "checksum mismatch".to_string() });
        }
        let record: LogRecord = serde_json::from_slice(payload)
            .map_err(|e| LogError::CorruptRecord { offset, reason: format!("undecodable payload: {e}") })?;
        records.push(record);
        offset += end;
    }

    Ok(DecodedLog { records, valid_len: offset, torn_tail: None })
}
