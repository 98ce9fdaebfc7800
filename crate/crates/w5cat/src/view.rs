//! JSON shapes shared by the CLI and the HTTP service, so both surfaces
//! print the same answers.

use serde_json::{json, Map, Value as Json};
use w5cat_core::{AssetId, CatalogError, CatalogState, Partition};

/// Actor recorded for reads when the caller names none.
pub const ANONYMOUS: &str = "anonymous";

/// Asset kind plus the latest version of every item in each profile.
pub fn asset_view(state: &CatalogState, asset: &AssetId) -> Result<Json, CatalogError> {
    let kind = state.asset_kind(asset).ok_or_else(|| CatalogError::UnknownAsset(asset.clone()))?;
    let mut profiles = Map::new();
    for p in Partition::PROFILES {
        let items = state.profile(asset, p)?;
        if !items.is_empty() {
            profiles.insert(p.to_string(), serde_json::to_value(items).expect("items serialize"));
        }
    }
    let relationships = state.related(asset, None)?.len();
    Ok(json!({
        "asset": asset,
        "kind": kind,
        "profiles": profiles,
        "relationship_count": relationships,
    }))
}

/// Stable short code for an error, used in HTTP bodies.
pub fn error_code(e: &CatalogError) -> &'static str {
    use w5cat_core::ModelError as M;
    match e {
        CatalogError::Model(m) => match m {
            M::UnknownPartition(_) => "unknown_partition",
            M::InvalidAssetId(_) => "invalid_asset_id",
            M::EmptyKey => "empty_key",
            M::EmptyActor => "missing_actor",
            M::MalformedValue(_) => "malformed_value",
            M::InvalidValue(_) => "invalid_value",
            M::UnknownAuditOp(_) => "unknown_audit_op",
        },
        CatalogError::Relate(_) => "relate",
        CatalogError::UnknownAsset(_) => "unknown_asset",
        CatalogError::RelationshipPartitionMisuse => "relationship_partition_misuse",
        CatalogError::NotFound { .. } => "not_found",
        CatalogError::AlreadySuperseded { .. } => "already_superseded",
        CatalogError::MissingReason => "missing_reason",
        CatalogError::EmptyQuery => "empty_query",
        CatalogError::TooFewEndpoints(_) => "too_few_endpoints",
        CatalogError::InvalidVersion => "invalid_version",
        CatalogError::Storage(_) => "storage",
        CatalogError::Log(_) => "log",
    }
}
