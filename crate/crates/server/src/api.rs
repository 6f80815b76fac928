//! JSON routes. Every handler takes the one service lock for the length of
//! its call; `GET /topics` reads a copy refreshed after each topic change.

use std::sync::Arc;

use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request, State};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{NaiveDate, Utc};
use parking_lot::{Mutex, RwLock};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use quickstep::classifier::ClassifierError;
use quickstep::ids::{DocId, Group, Timestamp, TopicId, UserId};
use quickstep::profiler::ProfileError;
use quickstep::service::{
    BrowseEntry, CycleReport, ExampleDoc, FeedbackKind, IngestReport, Service, ServiceError,
};
use quickstep::store::Phase;
use quickstep::taxonomy::{Taxonomy, TaxonomyError, TaxonomyMode};

pub const TOKEN_HEADER: &str = "x-quickstep-token";

pub type Clock = Arc<dyn Fn() -> Timestamp + Send + Sync>;

#[derive(Clone)]
pub struct AppState {
    service: Arc<Mutex<Service>>,
    topics: Arc<RwLock<[TopicList; 2]>>,
    token: Option<String>,
    clock: Clock,
}

impl AppState {
    pub fn new(service: Service, clock: Clock) -> Self {
        let token = service.config().token.clone();
        let topics = Group::ALL.map(|g| TopicList::of(g, service.taxonomy(g)));
        Self {
            service: Arc::new(Mutex::new(service)),
            topics: Arc::new(RwLock::new(topics)),
            token,
            clock,
        }
    }

    pub fn system_clock() -> Clock {
        Arc::new(Utc::now)
    }

    /// Runs `f` under the service lock on the blocking pool.
    async fn call<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Service, Timestamp) -> Result<T, ApiError> + Send + 'static,
    {
        let service = Arc::clone(&self.service);
        let now = (self.clock)();
        tokio::task::spawn_blocking(move || f(&mut service.lock(), now))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
    }

    /// Read access for callers outside the request path.
    pub fn with_service<T>(&self, f: impl FnOnce(&Service) -> T) -> T {
        f(&self.service.lock())
    }

    fn refresh_topics(&self, service: &Service) {
        *self.topics.write() = Group::ALL.map(|g| TopicList::of(g, service.taxonomy(g)));
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/log/browse", post(ingest))
        .route("/recommendations/{user}", get(recommendations))
        .route("/feedback", post(feedback))
        .route("/examples", post(examples))
        .route("/topics", post(add_topic).get(topics))
        .route("/admin/run-cycle", post(run_cycle))
        .layer(middleware::from_fn_with_state(state.clone(), authenticate))
        .with_state(state)
}

async fn authenticate(State(state): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let sent = request.headers().get(TOKEN_HEADER).and_then(|v| v.to_str().ok());
        if sent != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong token")
                .into_response();
        }
    }
    next.run(request).await
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn internal(message: String) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.code, "message": self.message });
        (self.status, Json(body)).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        use StatusCode as S;
        let message = e.to_string();
        let (status, code) = match &e {
            ServiceError::UnknownUser(_) | ServiceError::Profile(ProfileError::UnknownUser(_)) => {
                (S::NOT_FOUND, "unknown_user")
            }
            ServiceError::UnknownPaper(_) => (S::NOT_FOUND, "unknown_paper"),
            ServiceError::NoSetComputed => (S::CONFLICT, "no_set_computed"),
            ServiceError::PhaseOrder(_) => (S::CONFLICT, "phase_order"),
            ServiceError::UserExists(_) => (S::CONFLICT, "user_exists"),
            ServiceError::NotRecommended { .. } => (S::CONFLICT, "not_recommended"),
            ServiceError::Unclassified(_) => (S::CONFLICT, "unclassified"),
            ServiceError::MissingCorrectedTopic => (S::UNPROCESSABLE_ENTITY, "missing_corrected_topic"),
            ServiceError::Taxonomy(TaxonomyError::Locked) => (S::FORBIDDEN, "fixed_taxonomy"),
            ServiceError::Taxonomy(TaxonomyError::UnknownTopic(_))
            | ServiceError::Classifier(ClassifierError::UnknownTopic(_) | ClassifierError::RootTopic)
            | ServiceError::Profile(ProfileError::UnknownTopic(_)) => (S::UNPROCESSABLE_ENTITY, "invalid_topic"),
            ServiceError::Taxonomy(TaxonomyError::DuplicateLabel { .. }) => (S::CONFLICT, "duplicate_topic"),
            ServiceError::Taxonomy(_) => (S::UNPROCESSABLE_ENTITY, "invalid_topic"),
            ServiceError::Fetch(_) => (S::BAD_GATEWAY, "unreachable_document"),
            ServiceError::NotADocument(_) => (S::UNPROCESSABLE_ENTITY, "not_a_document"),
            ServiceError::Invalid(_) => (S::BAD_REQUEST, "bad_request"),
            _ => (S::INTERNAL_SERVER_ERROR, "internal"),
        };
        if status.is_server_error() {
            tracing::error!(error = %e, "request failed");
        }
        Self::new(status, code, message)
    }
}

/// `Json` whose rejections use the API error body.
pub struct JsonBody<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for JsonBody<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(value)) => Ok(Self(value)),
            Err(e) => Err(ApiError::new(e.status(), "bad_request", e.body_text())),
        }
    }
}

/// `Query` whose rejections use the API error body.
pub struct QueryParams<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for QueryParams<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        match Query::<T>::from_request_parts(parts, state).await {
            Ok(Query(value)) => Ok(Self(value)),
            Err(e) => Err(ApiError::new(e.status(), "bad_request", e.body_text())),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct BrowseBatch {
    pub entries: Vec<BrowseEntry>,
}

async fn ingest(State(state): State<AppState>, JsonBody(batch): JsonBody<BrowseBatch>) -> Result<Json<IngestReport>, ApiError> {
    state
        .call(move |s, _| Ok(s.ingest_browse_log(&batch.entries)?))
        .await
        .map(Json)
}

#[derive(Debug, Default, Deserialize)]
pub struct RecommendationQuery {
    /// Fetch without acknowledging exposure.
    #[serde(default)]
    pub prefetch: bool,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct RecommendationItem {
    pub rank: usize,
    pub doc_id: DocId,
    pub url: Option<String>,
    pub topic: TopicId,
    pub topic_label: String,
    pub confidence: f64,
    pub score: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct RecommendationResponse {
    pub user: UserId,
    pub group: Group,
    pub date: NaiveDate,
    pub acknowledged: bool,
    pub items: Vec<RecommendationItem>,
}

async fn recommendations(
    State(state): State<AppState>,
    Path(user): Path<String>,
    QueryParams(query): QueryParams<RecommendationQuery>,
) -> Result<Json<RecommendationResponse>, ApiError> {
    let user: UserId = user.parse().map_err(|e| ApiError::bad_request(format!("user: {e}")))?;
    state
        .call(move |s, now| {
            let set = s.serve_recommendations(&user, now, !query.prefetch)?;
            let taxonomy = s.taxonomy(set.group);
            let items = set
                .items
                .iter()
                .map(|r| RecommendationItem {
                    rank: r.rank,
                    doc_id: r.doc_id.clone(),
                    url: s.document(&r.doc_id).map(|d| d.url.clone()),
                    topic: r.topic.clone(),
                    topic_label: taxonomy.node(&r.topic).map(|n| n.label.clone()).unwrap_or_default(),
                    confidence: r.confidence,
                    score: r.score,
                })
                .collect();
            Ok(RecommendationResponse {
                acknowledged: s.was_served(&set.user, set.date),
                user: set.user,
                group: set.group,
                date: set.date,
                items,
            })
        })
        .await
        .map(Json)
}

#[derive(Debug, Deserialize)]
pub struct FeedbackRequest {
    pub user: UserId,
    pub doc_id: DocId,
    pub kind: FeedbackKind,
    #[serde(default)]
    pub corrected_topic: Option<TopicId>,
}

async fn feedback(State(state): State<AppState>, JsonBody(req): JsonBody<FeedbackRequest>) -> Result<StatusCode, ApiError> {
    state
        .call(move |s, now| {
            s.submit_feedback(&req.user, &req.doc_id, req.kind, req.corrected_topic, now)?;
            Ok(StatusCode::NO_CONTENT)
        })
        .await
}

#[derive(Debug, Deserialize)]
pub struct ExampleRequest {
    pub user: UserId,
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default)]
    pub doc_id: Option<DocId>,
    #[serde(default)]
    pub text: Option<String>,
    pub topic: TopicId,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ExampleResponse {
    pub doc_id: DocId,
    pub group: Group,
    pub topic: TopicId,
    pub training_examples: usize,
}

async fn examples(
    State(state): State<AppState>,
    JsonBody(req): JsonBody<ExampleRequest>,
) -> Result<(StatusCode, Json<ExampleResponse>), ApiError> {
    let doc = match (req.url, req.doc_id) {
        (Some(url), None) => ExampleDoc::Url { url, text: req.text },
        (None, Some(id)) => ExampleDoc::Known(id),
        _ => return Err(ApiError::bad_request("give exactly one of url and doc_id")),
    };
    state
        .call(move |s, now| {
            let group = s.user_group(&req.user)?;
            let doc_id = s.submit_example(&req.user, doc, &req.topic, now)?;
            Ok(ExampleResponse {
                doc_id,
                group,
                topic: req.topic,
                training_examples: s.training_set(group).len(),
            })
        })
        .await
        .map(|r| (StatusCode::CREATED, Json(r)))
}

#[derive(Debug, Deserialize)]
pub struct TopicRequest {
    pub group: Group,
    pub label: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TopicEntry {
    pub id: TopicId,
    pub label: String,
    pub parent: Option<TopicId>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TopicList {
    pub group: Group,
    pub mode: TaxonomyMode,
    pub root: TopicId,
    pub topics: Vec<TopicEntry>,
}

impl TopicList {
    fn of(group: Group, taxonomy: &Taxonomy) -> Self {
        Self {
            group,
            mode: taxonomy.mode(),
            root: taxonomy.root().clone(),
            topics: taxonomy
                .nodes()
                .iter()
                .map(|n| TopicEntry {
                    id: n.id.clone(),
                    label: n.label.clone(),
                    parent: n.parent.clone(),
                })
                .collect(),
        }
    }
}

async fn add_topic(
    State(state): State<AppState>,
    JsonBody(req): JsonBody<TopicRequest>,
) -> Result<(StatusCode, Json<TopicEntry>), ApiError> {
    if req.group != Group::Flat {
        return Err(ApiError::new(
            StatusCode::FORBIDDEN,
            "fixed_taxonomy",
            "topics can only be added to the flat list",
        ));
    }
    let app = state.clone();
    state
        .call(move |s, now| {
            let id = s.add_topic(Group::Flat, &req.label, None, false, now)?;
            app.refresh_topics(s);
            let node = s.taxonomy(Group::Flat).node(&id).expect("topic just added");
            Ok(TopicEntry {
                id,
                label: node.label.clone(),
                parent: node.parent.clone(),
            })
        })
        .await
        .map(|t| (StatusCode::CREATED, Json(t)))
}

#[derive(Debug, Deserialize)]
pub struct TopicsQuery {
    pub group: Group,
}

async fn topics(State(state): State<AppState>, QueryParams(q): QueryParams<TopicsQuery>) -> Json<TopicList> {
    let lists = state.topics.read();
    Json(lists[Group::ALL.iter().position(|g| *g == q.group).expect("known group")].clone())
}

#[derive(Debug, Deserialize)]
pub struct CycleRequest {
    /// `nightly` or `daily`.
    pub phase: String,
    pub as_of: NaiveDate,
}

async fn run_cycle(State(state): State<AppState>, JsonBody(req): JsonBody<CycleRequest>) -> Result<Json<CycleReport>, ApiError> {
    let phase: Phase = req.phase.parse().map_err(|_| ApiError::bad_request(format!("phase: unknown {:?}", req.phase)))?;
    state
        .call(move |s, now| Ok(s.run_cycle(phase, req.as_of, now)?))
        .await
        .map(Json)
}
