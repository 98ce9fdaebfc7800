//! HTTP service over a single store. Writes and audited reads both go
//! through one mutex, so records are appended in request order.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Multipart, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value as Json_};
use w5cat_core::classify;
use w5cat_core::metrics::consistency_report;
use w5cat_core::{
    parse_partition, AssetId, AuditFilter, AuditOp, CatalogError, Endpoint, ItemRef, ModelError, Partition,
    SearchScope, Value, VersionSelector,
};

use crate::ingest::{parse_responses, CsvError};
use crate::store::{export_jsonl, Store, StoreError};
use crate::view::{asset_view, error_code, ANONYMOUS};

pub const ACTOR_HEADER: &str = "x-actor";

pub type Shared = Arc<Mutex<Store>>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }
}

impl From<CatalogError> for ApiError {
    fn from(e: CatalogError) -> Self {
        let status = match &e {
            CatalogError::UnknownAsset(_) | CatalogError::NotFound { .. } => StatusCode::NOT_FOUND,
            CatalogError::AlreadySuperseded { .. } => StatusCode::CONFLICT,
            CatalogError::RelationshipPartitionMisuse | CatalogError::Model(ModelError::UnknownPartition(_)) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            CatalogError::Storage(_) | CatalogError::Log(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, error_code(&e), e.to_string())
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        CatalogError::from(e).into()
    }
}

impl From<CsvError> for ApiError {
    fn from(e: CsvError) -> Self {
        Self::bad_request("malformed_responses", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "code": self.code, "message": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn lock(shared: &Shared) -> MutexGuard<'_, Store> {
    // A panic mid-request leaves the in-memory state as committed records
    // describe it, so the poisoned guard is still usable.
    shared.lock().unwrap_or_else(|p| p.into_inner())
}

fn required_actor(headers: &HeaderMap) -> ApiResult<String> {
    match headers.get(ACTOR_HEADER).and_then(|v| v.to_str().ok()).map(str::trim) {
        Some(a) if !a.is_empty() => Ok(a.to_owned()),
        _ => Err(ApiError::bad_request("missing_actor", "X-Actor header is required for this request")),
    }
}

fn reader(headers: &HeaderMap) -> String {
    required_actor(headers).unwrap_or_else(|_| ANONYMOUS.to_owned())
}

fn asset_id(raw: &str) -> ApiResult<AssetId> {
    Ok(AssetId::new(raw)?)
}

fn partition(raw: &str) -> ApiResult<Partition> {
    Ok(parse_partition(raw)?)
}

fn body_value(body: &str) -> ApiResult<Value> {
    Ok(Value::from_json(body)?)
}

#[derive(Deserialize)]
struct NewAsset {
    uri: String,
    #[serde(default)]
    kind: String,
}

async fn add_asset(State(s): State<Shared>, headers: HeaderMap, Json(req): Json<NewAsset>) -> ApiResult<Response> {
    let actor = required_actor(&headers)?;
    let mut store = lock(&s);
    let asset = store.write(|c| c.register_asset(&actor, &req.uri, &req.kind))?;
    let seq = store.state().last_seq();
    Ok((StatusCode::CREATED, Json(json!({ "asset": asset, "seq": seq }))).into_response())
}

async fn show_asset(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Json_>> {
    let asset = asset_id(&id)?;
    let store = lock(&s);
    Ok(Json(asset_view(store.state(), &asset)?))
}

async fn put_item(
    State(s): State<Shared>,
    Path((id, p, key)): Path<(String, String, String)>,
    headers: HeaderMap,
    body: String,
) -> ApiResult<Json<Json_>> {
    let actor = required_actor(&headers)?;
    let asset = asset_id(&id)?;
    let partition = partition(&p)?;
    let value = body_value(&body)?;
    let receipt = lock(&s).write(|c| c.set_mi(&actor, &asset, partition, &key, value))?;
    Ok(Json(json!(receipt)))
}

#[derive(Deserialize)]
struct SupersedeBody {
    version: u32,
    value: serde_json::Value,
    reason: String,
}

async fn supersede_item(
    State(s): State<Shared>,
    Path((id, p, key)): Path<(String, String, String)>,
    headers: HeaderMap,
    Json(req): Json<SupersedeBody>,
) -> ApiResult<Json<Json_>> {
    let actor = required_actor(&headers)?;
    let target = ItemRef { asset: asset_id(&id)?, partition: partition(&p)?, key, version: req.version };
    let value = body_value(&req.value.to_string())?;
    let receipt = lock(&s).write(|c| c.supersede(&actor, &target, value, &req.reason))?;
    Ok(Json(json!(receipt)))
}

#[derive(Deserialize)]
struct VersionsQuery {
    versions: Option<String>,
}

async fn get_item(
    State(s): State<Shared>,
    Path((id, p, key)): Path<(String, String, String)>,
    Query(q): Query<VersionsQuery>,
    headers: HeaderMap,
) -> ApiResult<Json<Json_>> {
    let asset = asset_id(&id)?;
    let partition = partition(&p)?;
    let selector: VersionSelector = match q.versions.as_deref() {
        None | Some("") => VersionSelector::Latest,
        Some(v) => v.parse().map_err(|e: CatalogError| ApiError::from(e))?,
    };
    let actor = reader(&headers);
    let items = lock(&s).write(|c| c.get_mi(&actor, &asset, partition, &key, selector))?;
    Ok(Json(item_answer(selector, items)))
}

/// `latest` and exact versions answer with one item, `all` with an array.
pub fn item_answer(selector: VersionSelector, mut items: Vec<w5cat_core::MetadataItem>) -> Json_ {
    match selector {
        VersionSelector::All => json!(items),
        _ => json!(items.pop()),
    }
}

async fn list_profile(State(s): State<Shared>, Path((id, p)): Path<(String, String)>) -> ApiResult<Json<Json_>> {
    let asset = asset_id(&id)?;
    let partition = partition(&p)?;
    let items = lock(&s).catalog().list_profile(&asset, partition)?;
    Ok(Json(json!(items)))
}

#[derive(Deserialize)]
struct SearchQuery {
    #[serde(default)]
    q: String,
    scope: Option<String>,
    #[serde(default)]
    all_versions: Option<String>,
}

fn flag(raw: Option<&str>) -> ApiResult<bool> {
    match raw.map(str::trim) {
        None | Some("") | Some("false") | Some("0") => Ok(false),
        Some("true") | Some("1") => Ok(true),
        Some(other) => Err(ApiError::bad_request("invalid_flag", format!("expected true or false, got {other:?}"))),
    }
}

async fn search(State(s): State<Shared>, Query(q): Query<SearchQuery>, headers: HeaderMap) -> ApiResult<Json<Json_>> {
    let scope: SearchScope = match q.scope.as_deref() {
        None | Some("") => SearchScope::Global,
        Some(raw) => raw.parse().map_err(|e: ModelError| ApiError::from(e))?,
    };
    let all = flag(q.all_versions.as_deref())?;
    let actor = reader(&headers);
    let result = lock(&s).write(|c| c.search(&actor, &q.q, scope, all))?;
    Ok(Json(json!(result)))
}

#[derive(Deserialize)]
struct NewRelationship {
    endpoints: Vec<EndpointBody>,
    key: String,
    value: serde_json::Value,
}

#[derive(Deserialize)]
struct EndpointBody {
    asset: String,
    partition: String,
}

async fn relate(
    State(s): State<Shared>,
    headers: HeaderMap,
    Json(req): Json<NewRelationship>,
) -> ApiResult<Json<Json_>> {
    let actor = required_actor(&headers)?;
    let endpoints = req
        .endpoints
        .iter()
        .map(|e| Ok(Endpoint::new(asset_id(&e.asset)?, partition(&e.partition)?)))
        .collect::<ApiResult<Vec<_>>>()?;
    let value = body_value(&req.value.to_string())?;
    let receipt = lock(&s).write(|c| c.create_relationship(&actor, endpoints, &req.key, value))?;
    Ok(Json(json!(receipt)))
}

#[derive(Deserialize)]
struct RelatedQuery {
    partition: Option<String>,
}

async fn related(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<RelatedQuery>,
) -> ApiResult<Json<Json_>> {
    let asset = asset_id(&id)?;
    let partition = match q.partition.as_deref() {
        None | Some("") => None,
        Some(p) => Some(partition(p)?),
    };
    let records = lock(&s).catalog().find_related(&asset, partition)?;
    Ok(Json(json!(records)))
}

#[derive(Deserialize)]
struct AuditQuery {
    asset: Option<String>,
    actor: Option<String>,
    op: Option<String>,
    since: Option<u64>,
    until: Option<u64>,
}

async fn audit(State(s): State<Shared>, Query(q): Query<AuditQuery>) -> ApiResult<Json<Json_>> {
    let filter = AuditFilter {
        asset: q.asset.as_deref().filter(|a| !a.is_empty()).map(asset_id).transpose()?,
        actor: q.actor.filter(|a| !a.is_empty()),
        op: q.op.as_deref().filter(|o| !o.is_empty()).map(str::parse::<AuditOp>).transpose()?,
        since: q.since,
        until: q.until,
    };
    Ok(Json(json!(lock(&s).catalog().audit_trail(&filter))))
}

#[derive(Deserialize)]
struct ClassifyBody {
    question: String,
}

async fn classify_question(Json(req): Json<ClassifyBody>) -> Json<Json_> {
    Json(json!(classify::suggest(&req.question)))
}

async fn analyze(mut multipart: Multipart) -> ApiResult<Json<Json_>> {
    let upload = |e: axum::extract::multipart::MultipartError| ApiError::bad_request("malformed_upload", e.to_string());
    let field = multipart.next_field().await.map_err(upload)?;
    let data = match field {
        Some(f) => Some(f.bytes().await.map_err(upload)?),
        None => None,
    };
    let data = data.ok_or_else(|| ApiError::bad_request("malformed_upload", "no file in upload"))?;
    let ds = parse_responses(&data[..])?;
    let report = consistency_report(&ds).map_err(|e| ApiError::bad_request("no_data", e.to_string()))?;
    Ok(Json(json!(report)))
}

async fn export(State(s): State<Shared>) -> ApiResult<Response> {
    let records = lock(&s)
        .log_records()
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], export_jsonl(&records)).into_response())
}

pub fn router(shared: Shared) -> Router {
    Router::new()
        .route("/assets", post(add_asset))
        .route("/assets/{id}", get(show_asset))
        .route("/assets/{id}/profiles/{partition}", get(list_profile))
        .route("/assets/{id}/profiles/{partition}/{key}", put(put_item).get(get_item))
        .route("/assets/{id}/profiles/{partition}/{key}/supersede", post(supersede_item))
        .route("/assets/{id}/relationships", get(related))
        .route("/relationships", post(relate))
        .route("/search", get(search))
        .route("/audit", get(audit))
        .route("/classify", post(classify_question))
        .route("/analysis/responses", post(analyze))
        .route("/export", get(export))
        .with_state(shared)
}

/// Bind `listen`, announce the bound address on stdout and serve until
/// interrupted.
pub fn serve(store: Store, listen: &str) -> Result<(), ServeError> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(listen).await?;
        let addr: SocketAddr = listener.local_addr()?;
        println!("listening on http://{addr}");
        let app = router(Arc::new(Mutex::new(store)));
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Store(#[from] StoreError),
}
