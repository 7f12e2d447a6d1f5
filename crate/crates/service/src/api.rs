//! HTTP/JSON API.
//!
//! | method | path | body | success |
//! |---|---|---|---|
//! | POST | `/campaigns` | [`CreateCampaign`] | 201 new, 200 identical re-create |
//! | GET | `/campaigns` | | ids |
//! | GET | `/campaigns/{id}` | | [`CampaignDoc`] |
//! | GET | `/campaigns/{id}/next` | | [`NextAction`] |
//! | POST | `/campaigns/{id}/trials` | [`TrialInput`] | 201 new, 200 idempotent replay |
//! | GET | `/campaigns/{id}/report` | `?format=csv` optional | [`CampaignReport`] |
//! | POST | `/traces` | [`TraceUpload`] or multipart `force`/`kin` | 201 new, 200 known |
//! | GET | `/traces/{id}` | | [`StoredTrace`] |
//! | POST | `/advise` | [`AdviseRequest`] | [`Advice`] |
//!
//! Failures are `application/problem+json` documents: 404 for unknown ids,
//! 409 for protocol violations and not-ready results, 422 for invalid input.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use droptest::advisor::{recommend, StrengthTable};
use droptest::campaign::{
    campaign_report, CampaignConfig, CampaignReport, CampaignState, Height, NextAction, Outcome,
    PartSpec, TrialInput,
};
use serde::{Deserialize, Serialize};

use crate::error::{Kind, ServiceError};
use crate::ops::{self, RigSettings};
use crate::store::{Recorded, Store, StoredTrace};

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub settings: Arc<RigSettings>,
    pub table: Arc<StrengthTable>,
}

impl AppState {
    pub fn new(store: Store, settings: RigSettings, table: StrengthTable) -> Self {
        Self {
            store: Arc::new(store),
            settings: Arc::new(settings),
            table: Arc::new(table),
        }
    }
}

/// RFC 7807 problem document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    #[serde(rename = "type")]
    pub kind: String,
    pub title: String,
    pub status: u16,
    pub detail: String,
}

impl Problem {
    fn new(status: StatusCode, slug: &str, detail: impl Into<String>) -> Self {
        Self {
            kind: format!("urn:droptest:problem:{slug}"),
            title: status.canonical_reason().unwrap_or("error").to_owned(),
            status: status.as_u16(),
            detail: detail.into(),
        }
    }
}

impl IntoResponse for Problem {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (
            status,
            [(header::CONTENT_TYPE, "application/problem+json")],
            Json(self),
        )
            .into_response()
    }
}

impl From<ServiceError> for Problem {
    fn from(e: ServiceError) -> Self {
        let status = match e.kind() {
            Kind::Conflict => StatusCode::CONFLICT,
            Kind::NotFound => StatusCode::NOT_FOUND,
            Kind::Invalid => StatusCode::UNPROCESSABLE_ENTITY,
            Kind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %e, "request failed");
        }
        Problem::new(status, e.slug(), e.to_string())
    }
}

impl From<droptest::Error> for Problem {
    fn from(e: droptest::Error) -> Self {
        ServiceError::from(e).into()
    }
}

/// JSON body whose rejections are reported as problem documents.
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = Problem;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Self(v)),
            Err(rejection) => Err(Problem::new(rejection.status(), "invalid-body", rejection.body_text())),
        }
    }
}

type ApiResult<T> = Result<T, Problem>;

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| Problem::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(Problem::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateCampaign {
    #[serde(default)]
    pub id: Option<String>,
    pub part: PartSpec,
    pub config: CampaignConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignDoc {
    pub id: String,
    #[serde(flatten)]
    pub state: CampaignState,
}

/// What the service acknowledges for a recorded trial. A retry with the same
/// idempotency key receives the identical document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReceipt {
    pub campaign_id: String,
    pub trial_id: u64,
    pub height_cm: Height,
    pub trial_index: u32,
    pub outcome: Outcome,
    pub peak_force_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_id: Option<String>,
    /// Trace analysis was scheduled; results appear in the report.
    pub analysis_queued: bool,
}

impl TrialReceipt {
    pub fn new(campaign_id: &str, r: &Recorded) -> Self {
        let t = &r.record;
        Self {
            campaign_id: campaign_id.to_owned(),
            trial_id: t.seq,
            height_cm: t.height_cm,
            trial_index: t.trial_index,
            outcome: t.outcome,
            peak_force_n: t.peak_force_n,
            idempotency_key: t.idempotency_key.clone(),
            trace_id: t.trace_id.clone(),
            analysis_queued: t.trace_id.is_some(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceUpload {
    pub force_csv: String,
    pub kin_csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReceipt {
    pub trace_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdviseRequest {
    #[serde(alias = "target")]
    pub target_f_max_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Advice {
    pub slot_depth_mm: f64,
    pub wall_loops: u32,
    pub mean_breaking_force_n: f64,
    pub margin_n: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    format: Option<String>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/campaigns", post(create_campaign).get(list_campaigns))
        .route("/campaigns/{id}", get(get_campaign))
        .route("/campaigns/{id}/next", get(next_action))
        .route("/campaigns/{id}/trials", post(post_trial))
        .route("/campaigns/{id}/report", get(report))
        .route("/traces", post(post_trace))
        .route("/traces/{id}", get(get_trace))
        .route("/advise", post(advise))
        .fallback(|| async { Problem::new(StatusCode::NOT_FOUND, "not-found", "no such route") })
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn create_campaign(
    State(app): State<AppState>,
    ApiJson(body): ApiJson<CreateCampaign>,
) -> ApiResult<(StatusCode, Json<CampaignDoc>)> {
    let (id, state, created) = blocking(move || {
        app.store
            .create_campaign(body.id.as_deref(), body.part, body.config)
    })
    .await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(CampaignDoc { id, state })))
}

async fn list_campaigns(State(app): State<AppState>) -> ApiResult<Json<Vec<String>>> {
    blocking(move || app.store.campaign_ids()).await.map(Json)
}

async fn get_campaign(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<CampaignDoc>> {
    let state = blocking({
        let id = id.clone();
        move || app.store.campaign(&id)
    })
    .await?;
    Ok(Json(CampaignDoc { id, state }))
}

async fn next_action(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<NextAction>> {
    let state = blocking(move || app.store.campaign(&id)).await?;
    Ok(Json(state.next_action()?))
}

async fn post_trial(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    ApiJson(mut input): ApiJson<TrialInput>,
) -> ApiResult<(StatusCode, Json<TrialReceipt>)> {
    if let Some(value) = headers.get(IDEMPOTENCY_HEADER) {
        let key = value
            .to_str()
            .map_err(|_| Problem::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", "idempotency key must be ASCII"))?
            .to_owned();
        match input.idempotency_key.as_deref() {
            Some(body_key) if body_key != key => {
                return Err(Problem::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "validation",
                    "idempotency key in header and body disagree",
                ))
            }
            _ => input.idempotency_key = Some(key),
        }
    }

    let recorded = blocking({
        let app = app.clone();
        let id = id.clone();
        move || {
            let input = ops::prepare_trial(&app.store, &app.settings, &input)?;
            app.store.record_trial(&id, &input)
        }
    })
    .await?;

    if !recorded.replayed && recorded.record.trace_id.is_some() {
        let (campaign, seq) = (id.clone(), recorded.record.seq);
        tokio::task::spawn_blocking(move || {
            if let Err(e) = ops::analyze_and_attach(&app.store, &app.settings, &campaign, seq) {
                tracing::warn!(%campaign, seq, error = %e, "trace analysis could not be stored");
            }
        });
    }
    let status = if recorded.replayed { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(TrialReceipt::new(&id, &recorded))))
}

async fn report(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ReportQuery>,
) -> ApiResult<Response> {
    let state = blocking(move || app.store.campaign(&id)).await?;
    match q.format.as_deref() {
        Some("csv") => Ok(([(header::CONTENT_TYPE, "text/csv")], state.to_table_csv()).into_response()),
        None | Some("json") => Ok(Json::<CampaignReport>(campaign_report(&state)).into_response()),
        Some(other) => Err(Problem::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "validation",
            format!("unknown report format {other:?}"),
        )),
    }
}

async fn read_multipart(mut form: Multipart) -> ApiResult<TraceUpload> {
    let (mut force, mut kin) = (None, None);
    let bad = |detail: String| Problem::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-body", detail);
    while let Some(field) = form.next_field().await.map_err(|e| bad(e.body_text()))? {
        let name = field.name().unwrap_or_default().to_owned();
        let text = field.text().await.map_err(|e| bad(e.body_text()))?;
        match name.as_str() {
            "force" | "force_csv" => force = Some(text),
            "kin" | "kin_csv" => kin = Some(text),
            _ => return Err(bad(format!("unexpected form field {name:?}"))),
        }
    }
    match (force, kin) {
        (Some(force_csv), Some(kin_csv)) => Ok(TraceUpload { force_csv, kin_csv }),
        _ => Err(bad("both `force` and `kin` files are required".into())),
    }
}

async fn post_trace(State(app): State<AppState>, req: Request) -> ApiResult<(StatusCode, Json<TraceReceipt>)> {
    let is_multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let upload = if is_multipart {
        let form = Multipart::from_request(req, &())
            .await
            .map_err(|e| Problem::new(e.status(), "invalid-body", e.body_text()))?;
        read_multipart(form).await?
    } else {
        ApiJson::<TraceUpload>::from_request(req, &()).await?.0
    };
    let (trace_id, new) = blocking(move || app.store.put_trace(&upload.force_csv, &upload.kin_csv)).await?;
    let status = if new { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(TraceReceipt { trace_id })))
}

async fn get_trace(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<StoredTrace>> {
    blocking(move || app.store.trace(&id)).await.map(Json)
}

async fn advise(State(app): State<AppState>, ApiJson(req): ApiJson<AdviseRequest>) -> ApiResult<Json<Advice>> {
    let r = recommend(req.target_f_max_n, &app.table)?;
    Ok(Json(Advice {
        slot_depth_mm: r.entry.slot_depth_mm,
        wall_loops: r.entry.wall_loops,
        mean_breaking_force_n: r.entry.mean_breaking_force_n,
        margin_n: r.margin_n,
        note: r.note,
    }))
}
