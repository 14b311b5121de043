use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::ConnectInfo;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use gridpass::service::http::router;
use gridpass::service::{grid_from_view, AuthService, ChallengeView, ServiceConfig};
use gridpass::store::SharedStore;
use gridpass::{default_charset, CredentialRecord, CredentialStore, StoreMode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(rate_limit: u32) -> (Router, Arc<AuthService>) {
    let cs = Arc::new(default_charset());
    let mut store = CredentialStore::new(Arc::clone(&cs), StoreMode::PasswordOnly);
    store.add(CredentialRecord::password_only("Lagos(2006)")).unwrap();
    let config = ServiceConfig {
        rate_limit,
        ..ServiceConfig::default()
    };
    let svc = Arc::new(AuthService::with_store(config, Arc::new(SharedStore::new(store, None))).with_seed(11));
    (router(Arc::clone(&svc)), svc)
}

async fn call(app: &Router, method: Method, path: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut builder = Request::builder().method(method).uri(path);
    if body.is_some() {
        builder = builder.header("content-type", "application/json");
    }
    let mut req = builder
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    req.extensions_mut()
        .insert(ConnectInfo("192.0.2.7:5000".parse::<SocketAddr>().unwrap()));
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, v)
}

fn encode(view: &Value, password: &str) -> String {
    let view: ChallengeView = serde_json::from_value(view.clone()).unwrap();
    let grid = grid_from_view(Arc::new(default_charset()), &view).unwrap();
    grid.encode(password).unwrap().to_string()
}

#[tokio::test]
async fn challenge_shape() {
    let (app, _) = app(0);
    let (status, v) = call(&app, Method::POST, "/api/challenge", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["challenge_id"].as_str().unwrap().len(), 32);
    let cells = v["grid"].as_array().unwrap();
    assert_eq!(cells.len(), 80);
    assert!(cells[0]["ch"].is_string() && cells[0]["code"].is_u64());
    assert!(v["expires_at"].as_u64().unwrap() > 1_000_000_000_000);
}

#[tokio::test]
async fn login_logout_cycle() {
    let (app, svc) = app(0);
    let (_, ch) = call(&app, Method::POST, "/api/challenge", None).await;
    let body = json!({"challenge_id": ch["challenge_id"], "digits": encode(&ch, "Lagos(2006)")});
    let (status, v) = call(&app, Method::POST, "/api/login", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["ok"], json!(true));
    let session = v["session"].as_str().unwrap().to_string();
    assert!(svc.session_valid(&session));

    let (status, v) = call(&app, Method::POST, "/api/logout", Some(json!({"session": session}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, json!({"ok": true}));
    assert!(!svc.session_valid(&session));
}

#[tokio::test]
async fn failed_login_is_401_with_next_challenge() {
    let (app, _) = app(0);
    let (_, ch) = call(&app, Method::POST, "/api/challenge", None).await;
    let body = json!({"challenge_id": ch["challenge_id"], "digits": encode(&ch, "wrong")});
    let (status, v) = call(&app, Method::POST, "/api/login", Some(body.clone())).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(v["ok"], json!(false));
    assert_eq!(v["reason"], json!("authentication-failed"));
    let next = &v["next_challenge"];
    assert_ne!(next["challenge_id"], ch["challenge_id"]);
    assert_eq!(next["grid"].as_array().unwrap().len(), 80);

    let (status, v) = call(&app, Method::POST, "/api/login", Some(body)).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(v["reason"], json!("challenge-already-used"));
}

#[tokio::test]
async fn malformed_and_unknown() {
    let (app, _) = app(0);
    let (_, ch) = call(&app, Method::POST, "/api/challenge", None).await;
    let (status, v) = call(
        &app,
        Method::POST,
        "/api/login",
        Some(json!({"challenge_id": ch["challenge_id"], "digits": "12a"})),
    )
    .await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(v["reason"], json!("malformed-digits"));

    let (status, v) = call(
        &app,
        Method::POST,
        "/api/login",
        Some(json!({"challenge_id": "00", "digits": "1"})),
    )
    .await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(v["reason"], json!("unknown-challenge"));
}

#[tokio::test]
async fn throttled_is_429() {
    let (app, _) = app(2);
    for _ in 0..2 {
        let (status, _) = call(&app, Method::POST, "/api/challenge", None).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (status, v) = call(&app, Method::POST, "/api/challenge", None).await;
    assert_eq!(status, StatusCode::TOO_MANY_REQUESTS);
    assert_eq!(v["reason"], json!("throttled"));
}

#[tokio::test]
async fn no_store_is_503() {
    let svc = Arc::new(AuthService::new(
        ServiceConfig::default(),
        Arc::new(default_charset()),
        None,
    ));
    let app = router(svc);
    let (status, v) = call(&app, Method::POST, "/api/challenge", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(v["reason"], json!("service-unavailable"));
    let (status, v) = call(
        &app,
        Method::POST,
        "/api/login",
        Some(json!({"challenge_id": "00", "digits": "1"})),
    )
    .await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(v["reason"], json!("service-unavailable"));
}

#[tokio::test]
async fn health_reports_store_size() {
    let (app, _) = app(0);
    let (status, v) = call(&app, Method::GET, "/api/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["store_size"], json!(1));
    assert!(v["status"].is_string());
}
