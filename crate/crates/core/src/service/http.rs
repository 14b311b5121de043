//! HTTP binding of [`AuthService`].
//!
//! | Route | Success | Failure |
//! |---|---|---|
//! | `POST /api/challenge` | 200 [`ChallengeView`] | 429 throttled, 503 unavailable |
//! | `POST /api/login` | 200 `{ok: true, session}` | 401 `{ok: false, reason, next_challenge}`, 429, 503 |
//! | `POST /api/logout` | 200 `{ok: true}` | |
//! | `GET /api/health` | 200 `{status, store_size}` | |

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{ConnectInfo, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use super::config::Config;
use super::{AuthService, FailureReason, LoginRequest, LoginResponse, ServiceError};
use crate::charset::CharacterSet;
use crate::store::{CredentialStore, SharedStore};

pub fn router(service: Arc<AuthService>) -> Router {
    Router::new()
        .route("/api/challenge", post(challenge))
        .route("/api/login", post(login))
        .route("/api/logout", post(logout))
        .route("/api/health", get(health))
        .with_state(service)
}

fn failure(status: StatusCode, reason: FailureReason) -> Response {
    (status, Json(json!({"ok": false, "reason": reason}))).into_response()
}

async fn challenge(State(svc): State<Arc<AuthService>>, ConnectInfo(addr): ConnectInfo<SocketAddr>) -> Response {
    match svc.issue_challenge(addr.ip()) {
        Ok(view) => Json(view).into_response(),
        Err(ServiceError::Throttled) => failure(StatusCode::TOO_MANY_REQUESTS, FailureReason::Throttled),
        Err(ServiceError::Unavailable) => failure(StatusCode::SERVICE_UNAVAILABLE, FailureReason::ServiceUnavailable),
    }
}

async fn login(
    State(svc): State<Arc<AuthService>>,
    ConnectInfo(addr): ConnectInfo<SocketAddr>,
    Json(req): Json<LoginRequest>,
) -> Response {
    let resp = svc.login(addr.ip(), &req);
    let status = match resp.reason() {
        None => StatusCode::OK,
        Some(FailureReason::Throttled) => StatusCode::TOO_MANY_REQUESTS,
        Some(FailureReason::ServiceUnavailable) => StatusCode::SERVICE_UNAVAILABLE,
        Some(_) => StatusCode::UNAUTHORIZED,
    };
    (status, Json::<LoginResponse>(resp)).into_response()
}

#[derive(Deserialize)]
struct LogoutRequest {
    session: String,
}

async fn logout(State(svc): State<Arc<AuthService>>, Json(req): Json<LogoutRequest>) -> Json<serde_json::Value> {
    svc.logout(&req.session);
    Json(json!({"ok": true}))
}

async fn health(State(svc): State<Arc<AuthService>>) -> Json<super::Health> {
    Json(svc.health())
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Charset(#[from] crate::charset::CharsetError),
    #[error("loading store {path}: {source}")]
    Store {
        path: std::path::PathBuf,
        source: crate::store::StoreError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Loads the store named by `config` and builds the service for it.
pub fn service_from_config(config: &Config) -> Result<AuthService, ServeError> {
    let charset = CharacterSet::builtin(&config.charset)?;
    let store = CredentialStore::load_with_charset(&config.store_path, &charset).map_err(|source| ServeError::Store {
        path: config.store_path.clone(),
        source,
    })?;
    let shared = SharedStore::new(store, Some(config.store_path.clone()));
    Ok(AuthService::with_store(config.service_config(), Arc::new(shared)))
}

/// Runs the HTTP server until ctrl-c.
pub async fn serve(config: &Config) -> Result<(), ServeError> {
    let service = Arc::new(service_from_config(config)?);
    let listener = tokio::net::TcpListener::bind(&config.listen).await?;
    eprintln!("gridpass listening on {}", listener.local_addr()?);
    axum::serve(
        listener,
        router(service).into_make_service_with_connect_info::<SocketAddr>(),
    )
    .with_graceful_shutdown(async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
