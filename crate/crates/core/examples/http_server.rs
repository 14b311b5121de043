//! Serve the HTTP API on an ephemeral port against a throwaway store, drive
//! one login over a real socket, then shut down.

use std::net::SocketAddr;
use std::sync::Arc;

use gridpass::service::http::router;
use gridpass::service::{grid_from_view, AuthService, ChallengeView, ServiceConfig};
use gridpass::store::SharedStore;
use gridpass::{default_charset, CredentialRecord, CredentialStore, StoreMode};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};

async fn post(addr: SocketAddr, path: &str, body: &str) -> String {
    let mut s = TcpStream::connect(addr).await.unwrap();
    let req = format!(
        "POST {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    s.write_all(req.as_bytes()).await.unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).await.unwrap();
    resp.split("\r\n\r\n").nth(1).unwrap_or_default().to_string()
}

#[tokio::main]
async fn main() {
    let cs = Arc::new(default_charset());
    let mut store = CredentialStore::new(Arc::clone(&cs), StoreMode::PasswordOnly);
    store.add(CredentialRecord::password_only("Lagos(2006)")).unwrap();
    let svc = Arc::new(AuthService::with_store(ServiceConfig::default(), Arc::new(SharedStore::new(store, None))));

    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let server = tokio::spawn(async move {
        axum::serve(listener, router(svc).into_make_service_with_connect_info::<SocketAddr>())
            .await
            .unwrap();
    });
    println!("listening on {addr}");

    let view: ChallengeView = serde_json::from_str(&post(addr, "/api/challenge", "").await).unwrap();
    let grid = grid_from_view(Arc::clone(&cs), &view).unwrap();
    let body = serde_json::json!({
        "challenge_id": view.challenge_id,
        "digits": grid.encode("Lagos(2006)").unwrap().to_string(),
    });
    println!("login -> {}", post(addr, "/api/login", &body.to_string()).await);
    server.abort();
}
