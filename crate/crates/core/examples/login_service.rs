//! The service in-process: issue a challenge, type against its grid, log in,
//! then show replay and a failed attempt.

use std::net::{IpAddr, Ipv4Addr};
use std::sync::Arc;

use gridpass::service::{grid_from_view, AuthService, LoginRequest, ServiceConfig};
use gridpass::store::SharedStore;
use gridpass::{default_charset, CredentialRecord, CredentialStore, StoreMode};

fn main() {
    let cs = Arc::new(default_charset());
    let mut store = CredentialStore::new(Arc::clone(&cs), StoreMode::PasswordOnly);
    store.add(CredentialRecord::password_only("Lagos(2006)")).unwrap();
    let svc = AuthService::with_store(ServiceConfig::default(), Arc::new(SharedStore::new(store, None)));
    let ip = IpAddr::V4(Ipv4Addr::LOCALHOST);

    let view = svc.issue_challenge(ip).unwrap();
    let grid = grid_from_view(Arc::clone(&cs), &view).unwrap();
    let req = LoginRequest {
        challenge_id: view.challenge_id.clone(),
        digits: grid.encode("Lagos(2006)").unwrap().to_string(),
        username: None,
    };
    println!("typed {}", req.digits);
    println!("login:  {}", serde_json::to_string(&svc.login(ip, &req)).unwrap());
    let replay = svc.login(ip, &req);
    println!("replay: {:?}", replay.reason());

    let view = replay.next_challenge().unwrap();
    let grid = grid_from_view(Arc::clone(&cs), view).unwrap();
    let wrong = LoginRequest {
        challenge_id: view.challenge_id.clone(),
        digits: grid.encode("guess").unwrap().to_string(),
        username: None,
    };
    println!("wrong:  {:?}", svc.login(ip, &wrong).reason());
    println!("health: {:?}", svc.health());
}
