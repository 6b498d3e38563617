//! HTTP/JSON front door: proof-of-work sessions, check-ins, questionnaires,
//! personal risk, investigator search and research aggregates.
//!
//! Every route but `/health` and the session handshake needs a bearer token,
//! and tokens are only issued against a verified proof of work.

pub mod api;
pub mod clock;
pub mod config;
pub mod error;
pub mod pow;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard, PoisonError};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{ConnectInfo, FromRequestParts, Query, State};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Duration, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use uuid::Uuid;
use venuetrace_core::ml::{predict_proba, ClassifierModel};
use venuetrace_core::model::{
    coarsen_timestamp, derive_risk_profile, encode_features, validate_record, Answers, ExposureRecord, FeatureLayout,
    RiskProfile, Timestamp, VenueType,
};
use venuetrace_core::qr::{map_venue_type, parse_qr};
use venuetrace_core::risk::{combined_risk, prune_events, risk_level, ExposureEvent, Palette};
use venuetrace_ledger::federated::{
    research_aggregate, search_contacts, AggregateQuery, ContactQuery, Filter, SearchOutcome,
};
use venuetrace_ledger::silo::{AnswerSubmission, ScanEvent, SiloCluster, SiloId, SiloPayload};

use crate::api::*;
use crate::clock::Clock;
use crate::config::{ConfigError, ServiceConfig};
use crate::error::ApiError;
use crate::pow::{per_minute, Challenge, ChallengeStore, RateTracker, ServerNonce, NONCE_BYTES};

#[derive(Clone, Debug)]
struct Grant {
    role: Role,
    user_id: Option<Uuid>,
    profile: RiskProfile,
}

#[derive(Clone, Debug)]
pub struct Session {
    pub role: Role,
    pub user_id: Option<Uuid>,
    pub expires_at: DateTime<Utc>,
}

#[derive(Clone, Debug)]
struct ScanInfo {
    user_id: Uuid,
    silo: SiloId,
    venue_type: VenueType,
    timestamp: Timestamp,
}

struct Inner {
    cluster: SiloCluster,
    rng: StdRng,
    challenges: ChallengeStore<Grant>,
    rates: RateTracker,
    sessions: HashMap<String, Session>,
    profiles: HashMap<Uuid, RiskProfile>,
    /// Committed scans by handle.
    scans: HashMap<Uuid, ScanInfo>,
    by_user: HashMap<Uuid, Vec<Uuid>>,
    /// Latest committed answers by handle.
    answers: HashMap<Uuid, Answers>,
}

pub struct AppState {
    cfg: ServiceConfig,
    clock: Arc<dyn Clock>,
    model: ClassifierModel,
    inner: Mutex<Inner>,
}

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("model expects {found} features; the questionnaire encodes {expected}")]
    ModelShape { expected: usize, found: usize },
    #[error("silo cluster: {0}")]
    Cluster(String),
}

impl AppState {
    pub fn new(cfg: ServiceConfig, model: ClassifierModel, clock: Arc<dyn Clock>) -> Result<Arc<Self>, StartError> {
        cfg.validate()?;
        let expected = FeatureLayout::questionnaire().len();
        if model.dim() != expected {
            return Err(StartError::ModelShape { expected, found: model.dim() });
        }
        let cluster = SiloCluster::new(cfg.silos.clone()).map_err(|e| StartError::Cluster(e.to_string()))?;
        let rng = match cfg.rng_seed {
            Some(seed) => StdRng::seed_from_u64(seed),
            None => StdRng::from_os_rng(),
        };
        let inner = Inner {
            cluster,
            rng,
            challenges: ChallengeStore::default(),
            rates: RateTracker::default(),
            sessions: HashMap::new(),
            profiles: HashMap::new(),
            scans: HashMap::new(),
            by_user: HashMap::new(),
            answers: HashMap::new(),
        };
        Ok(Arc::new(AppState { cfg, clock, model, inner: Mutex::new(inner) }))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(PoisonError::into_inner)
    }

    /// Runs `f` against the silo cluster.
    pub fn with_cluster<T>(&self, f: impl FnOnce(&SiloCluster) -> T) -> T {
        f(&self.lock().cluster)
    }

    pub fn health(&self) -> HealthResponse {
        let silos = self.lock().cluster.health();
        let status = if silos.iter().all(|s| s.has_quorum) { "ok" } else { "degraded" };
        HealthResponse { status: status.into(), silos }
    }

    fn user_score(&self, inner: &Inner, user: Uuid, now: Timestamp) -> Result<f64, ApiError> {
        let mut events = Vec::new();
        for handle in inner.by_user.get(&user).into_iter().flatten() {
            let scan = &inner.scans[handle];
            if scan.timestamp > now {
                continue;
            }
            let p = match inner.answers.get(handle) {
                Some(a) => {
                    let record = ExposureRecord::from_answers(scan.timestamp, user, scan.venue_type, a.clone());
                    let features = encode_features(&record).map_err(|e| ApiError::Internal(e.to_string()))?;
                    predict_proba(&self.model, &features).map_err(|e| ApiError::Internal(e.to_string()))?
                }
                None => self.cfg.unanswered_probability,
            };
            events.push(ExposureEvent::new(scan.timestamp, p));
        }
        prune_events(&mut events, now, &self.cfg.decay);
        combined_risk(&events, now, &self.cfg.decay).map_err(|e| ApiError::Internal(e.to_string()))
    }

    fn profile(&self, inner: &Inner, user: Uuid) -> RiskProfile {
        inner.profiles.get(&user).copied().unwrap_or_default()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/session", post(create_session))
        .route("/session/prove", post(prove_session))
        .route("/scan", post(post_scan))
        .route("/questionnaire", post(post_questionnaire))
        .route("/risk", get(get_risk))
        .route("/investigate/search", post(investigate))
        .route("/research/aggregate", get(aggregate))
        .route("/health", get(health))
        .with_state(state)
}

/// The caller's bearer session.
pub struct Auth(pub Session);

impl FromRequestParts<Arc<AppState>> for Auth {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &Arc<AppState>) -> Result<Self, Self::Rejection> {
        let header = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .ok_or_else(|| ApiError::Unauthorized("missing bearer token".into()))?;
        let token =
            header.strip_prefix("Bearer ").ok_or_else(|| ApiError::Unauthorized("expected a bearer token".into()))?;
        let now = state.clock.now();
        let mut inner = state.lock();
        match inner.sessions.get(token) {
            Some(s) if s.expires_at > now => Ok(Auth(s.clone())),
            Some(_) => {
                inner.sessions.remove(token);
                Err(ApiError::Unauthorized("session expired".into()))
            }
            None => Err(ApiError::Unauthorized("unknown token".into())),
        }
    }
}

impl Auth {
    fn require(&self, role: Role) -> Result<(), ApiError> {
        if self.0.role == role {
            Ok(())
        } else {
            Err(ApiError::Forbidden(self.0.role.name()))
        }
    }

    fn user(&self) -> Result<Uuid, ApiError> {
        self.require(Role::User)?;
        self.0.user_id.ok_or_else(|| ApiError::Internal("user session without identity".into()))
    }
}

/// Peer address when the server was started with connect info.
struct Peer(Option<SocketAddr>);

impl<S: Send + Sync> FromRequestParts<S> for Peer {
    type Rejection = std::convert::Infallible;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, Self::Rejection> {
        Ok(Peer(parts.extensions.get::<ConnectInfo<SocketAddr>>().map(|c| c.0)))
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(t)| t).map_err(|e| ApiError::BadRequest(e.body_text()))
}

fn query<T>(params: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    params.map(|Query(t)| t).map_err(|e| ApiError::BadRequest(e.body_text()))
}

fn iso(at: DateTime<Utc>) -> String {
    at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn check_credential(allowed: &[String], given: Option<&str>) -> Result<(), ApiError> {
    match given {
        Some(c) if allowed.iter().any(|a| a == c) => Ok(()),
        _ => Err(ApiError::Unauthorized("credential not accepted".into())),
    }
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    peer: Peer,
    req: Result<Json<SessionRequest>, JsonRejection>,
) -> Result<Json<ChallengeResponse>, ApiError> {
    let req = body(req)?;
    let client_key = hex::decode(&req.client_key).map_err(|e| ApiError::BadRequest(format!("client_key: {e}")))?;
    if client_key.is_empty() || client_key.len() > 256 {
        return Err(ApiError::BadRequest("client_key must be 1 to 256 bytes".into()));
    }
    let cfg = &state.cfg;
    match req.role {
        Role::User if req.user_id.is_none() => return Err(ApiError::BadRequest("user sessions need a user_id".into())),
        Role::User => {}
        Role::Investigator => check_credential(&cfg.investigator_credentials, req.credential.as_deref())?,
        Role::Researcher => check_credential(&cfg.researcher_credentials, req.credential.as_deref())?,
    }
    let source = match (peer.0, req.user_id) {
        (Some(addr), _) => addr.ip().to_string(),
        (None, Some(user)) => user.to_string(),
        (None, None) => req.client_key.clone(),
    };
    let now = state.clock.now();
    let window = Duration::seconds(cfg.pow.rate_window_secs);
    let mut inner = state.lock();
    let rate = per_minute(inner.rates.observe(&source, now, window), window);
    let difficulty = cfg.pow.difficulty(rate, cfg.pow.route_weight(req.role.name()));
    let server_nonce: ServerNonce = inner.rng.random::<[u8; NONCE_BYTES]>();
    let grant = Grant {
        role: req.role,
        user_id: req.user_id.filter(|_| req.role == Role::User),
        profile: derive_risk_profile(req.high_risk, req.moderate_risk),
    };
    let challenge = Challenge {
        server_nonce,
        client_key,
        difficulty,
        expires_at: now + Duration::seconds(cfg.pow.challenge_ttl_secs),
        grant,
    };
    let resp = ChallengeResponse {
        challenge_id: challenge.id(),
        client_key: req.client_key,
        difficulty,
        expires_at: iso(challenge.expires_at),
    };
    inner.challenges.insert(challenge, now);
    Ok(Json(resp))
}

async fn prove_session(
    State(state): State<Arc<AppState>>,
    req: Result<Json<ProveRequest>, JsonRejection>,
) -> Result<Json<TokenResponse>, ApiError> {
    let req = body(req)?;
    let server_nonce: ServerNonce = hex::decode(&req.challenge_id)
        .ok()
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| ApiError::BadRequest("challenge_id must be 32 hex digits".into()))?;
    let now = state.clock.now();
    let mut inner = state.lock();
    let grant = inner.challenges.verify(&server_nonce, req.nonce, now)?.grant;
    let token = hex::encode(inner.rng.random::<[u8; 32]>());
    let ttl = state.cfg.session_ttl_secs;
    let expires_at = now + Duration::seconds(ttl);
    if let Some(user) = grant.user_id {
        inner.profiles.insert(user, grant.profile);
    }
    inner.sessions.retain(|_, s| s.expires_at > now);
    inner.sessions.insert(token.clone(), Session { role: grant.role, user_id: grant.user_id, expires_at });
    Ok(Json(TokenResponse {
        token,
        role: grant.role,
        expires_in_secs: ttl,
        expires_at: (grant.role != Role::Researcher).then(|| iso(expires_at)),
    }))
}

async fn post_scan(
    State(state): State<Arc<AppState>>,
    auth: Auth,
    req: Result<Json<ScanRequest>, JsonRejection>,
) -> Result<Json<ScanAck>, ApiError> {
    let user_id = auth.user()?;
    let req = body(req)?;
    let qr = parse_qr(&req.qr)?;
    let venue_type = map_venue_type(&qr.venue_type_code);
    let timestamp = Timestamp::from_datetime(state.clock.now());
    let st = state.clone();
    blocking(move || {
        let mut inner = st.lock();
        let handle = Uuid::from_bytes(inner.rng.random());
        let silo = inner.cluster.silo_for(&qr.venue_id);
        let event = ScanEvent { handle, user_id, venue_id: qr.venue_id, venue_type, timestamp };
        inner.cluster.replicate(silo, SiloPayload::Scan(event).encode())?;
        inner.scans.insert(handle, ScanInfo { user_id, silo, venue_type, timestamp });
        inner.by_user.entry(user_id).or_default().push(handle);
        let window = coarsen_timestamp(timestamp);
        Ok(Json(ScanAck { handle, window, display_window: window.to_string() }))
    })
    .await
}

async fn post_questionnaire(
    State(state): State<Arc<AppState>>,
    auth: Auth,
    req: Result<Json<QuestionnaireRequest>, JsonRejection>,
) -> Result<Json<QuestionnaireAck>, ApiError> {
    let user_id = auth.user()?;
    let req = body(req)?;
    let submitted_at = Timestamp::from_datetime(state.clock.now());
    let st = state.clone();
    blocking(move || {
        let mut inner = st.lock();
        let scan =
            inner.scans.get(&req.handle).filter(|s| s.user_id == user_id).cloned().ok_or(ApiError::UnknownHandle)?;
        let mut record = ExposureRecord::from_answers(scan.timestamp, user_id, scan.venue_type, req.answers.clone());
        record.led_to_contamination = req.outcome;
        let violations = validate_record(&record);
        if !violations.is_empty() {
            return Err(ApiError::ValidationFailed(violations));
        }
        let submission = AnswerSubmission {
            handle: req.handle,
            user_id,
            answers: req.answers.clone(),
            outcome: req.outcome,
            submitted_at,
        };
        inner.cluster.replicate(scan.silo, SiloPayload::Answers(submission).encode())?;
        let replaced = inner.answers.insert(req.handle, req.answers).is_some();
        if replaced {
            tracing::info!(handle = %req.handle, "questionnaire answers replaced");
        }
        Ok(Json(QuestionnaireAck { accepted: true, replaced }))
    })
    .await
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))?
}

async fn get_risk(
    State(state): State<Arc<AppState>>,
    auth: Auth,
    params: Result<Query<PaletteParam>, QueryRejection>,
) -> Result<Json<RiskResponse>, ApiError> {
    let user = auth.user()?;
    let palette = query(params)?.palette;
    let now = Timestamp::from_datetime(state.clock.now());
    let inner = state.lock();
    let score = state.user_score(&inner, user, now)?;
    let level = risk_level(score, state.profile(&inner, user), &state.cfg.thresholds);
    Ok(Json(RiskResponse {
        score: round4(score),
        level,
        colour: level.colour(palette).into(),
        as_of: now.to_iso8601(),
    }))
}

async fn investigate(
    State(state): State<Arc<AppState>>,
    auth: Auth,
    params: Result<Query<PaletteParam>, QueryRejection>,
    req: Result<Json<ContactQuery>, JsonRejection>,
) -> Result<Json<InvestigateResponse>, ApiError> {
    auth.require(Role::Investigator)?;
    let palette: Palette = query(params)?.palette;
    let q = body(req)?;
    let now = Timestamp::from_datetime(state.clock.now());
    let inner = state.lock();
    let outcome = search_contacts(&inner.cluster, &q, now, &state.cfg.federated)?;
    let status = match outcome {
        SearchOutcome::Contacts(_) => SearchStatus::Contacts,
        SearchOutcome::EmptyWindow => SearchStatus::EmptyWindow,
    };
    let contacts = outcome
        .contacts()
        .iter()
        .map(|c| {
            let score = state.user_score(&inner, c.user_id, now)?;
            let level = risk_level(score, state.profile(&inner, c.user_id), &state.cfg.thresholds);
            Ok(ContactRow {
                user_id: c.user_id,
                window: c.window,
                display_window: c.window.to_string(),
                risk_score: round4(score),
                risk_level: level,
                colour: level.colour(palette).into(),
            })
        })
        .collect::<Result<_, ApiError>>()?;
    Ok(Json(InvestigateResponse { venue_id: q.venue_id, status, contacts }))
}

fn parse_filter_list(text: &str) -> Result<Vec<Filter>, ApiError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (field, level) = pair
                .split_once(':')
                .ok_or_else(|| ApiError::BadRequest(format!("filter `{pair}` is not Field:Level")))?;
            Ok(Filter { field: field.trim().to_owned(), level: level.trim().to_owned() })
        })
        .collect()
}

async fn aggregate(
    State(state): State<Arc<AppState>>,
    _auth: Auth,
    params: Result<Query<AggregateParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let p = query(params)?;
    let q = AggregateQuery {
        group_by: p.group_by,
        filters: parse_filter_list(p.filters.as_deref().unwrap_or(""))?,
        outcome_split: p.outcome_split,
    };
    let table = research_aggregate(&state.lock().cluster, &q, &state.cfg.federated)?;
    match p.format.as_deref() {
        None | Some("json") => Ok(Json(table).into_response()),
        Some("csv") => Ok(([(CONTENT_TYPE, "text/csv; charset=utf-8")], table.to_csv()).into_response()),
        Some(other) => Err(ApiError::BadRequest(format!("unknown format `{other}`"))),
    }
}

async fn health(State(state): State<Arc<AppState>>) -> (StatusCode, Json<HealthResponse>) {
    let h = state.health();
    let code = if h.status == "ok" { StatusCode::OK } else { StatusCode::SERVICE_UNAVAILABLE };
    (code, Json(h))
}
