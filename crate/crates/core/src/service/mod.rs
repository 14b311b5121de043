//! The login service: single-use challenge grids and digit verification.
//!
//! Every challenge carries a fresh grid drawn from a cryptographically
//! seeded generator. A challenge is consumed by the first login that names
//! it, successful or not; the removal from the active set under the
//! registry lock is the one point where concurrent submissions are ordered.
//! Failed logins return the next challenge so the client redraws the grid.

pub mod config;
pub mod http;

use std::collections::{HashMap, VecDeque};
use std::net::IpAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rand::rngs::StdRng;
use rand::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charset::CharacterSet;
use crate::grid::{generate, CodeGrid, DigitSequence, GridCell};
use crate::store::{SharedStore, StoreMode};
use crate::verifier::{verify_for_user, verify_inverted};

pub use config::Config;

pub trait Clock: Send + Sync {
    fn now(&self) -> SystemTime;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> SystemTime {
        SystemTime::now()
    }
}

/// A clock that only moves when told to.
#[derive(Debug)]
pub struct ManualClock(Mutex<SystemTime>);

impl ManualClock {
    pub fn new(start: SystemTime) -> Self {
        Self(Mutex::new(start))
    }

    pub fn advance(&self, by: Duration) {
        *self.0.lock().unwrap() += by;
    }
}

impl Default for ManualClock {
    fn default() -> Self {
        Self::new(UNIX_EPOCH + Duration::from_secs(1_800_000_000))
    }
}

impl Clock for ManualClock {
    fn now(&self) -> SystemTime {
        *self.0.lock().unwrap()
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub challenge_ttl: Duration,
    pub session_ttl: Duration,
    /// Requests allowed per source address per window; 0 disables.
    pub rate_limit: u32,
    pub rate_window: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            challenge_ttl: Duration::from_secs(120),
            session_ttl: Duration::from_secs(3600),
            rate_limit: 10,
            rate_window: Duration::from_secs(60),
        }
    }
}

/// A registered challenge.
#[derive(Debug, Clone)]
pub struct Challenge {
    pub id: String,
    pub grid: CodeGrid,
    pub issued_at: SystemTime,
    pub expires_at: SystemTime,
    pub consumed: bool,
}

/// Wire form of a challenge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeView {
    pub challenge_id: String,
    pub grid: Vec<GridCell>,
    /// Unix time in milliseconds.
    pub expires_at: u64,
}

impl ChallengeView {
    fn of(c: &Challenge) -> Self {
        Self {
            challenge_id: c.id.clone(),
            grid: c.grid.cells(),
            expires_at: unix_millis(c.expires_at),
        }
    }
}

fn unix_millis(t: SystemTime) -> u64 {
    t.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginRequest {
    pub challenge_id: String,
    pub digits: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub username: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    UnknownChallenge,
    ChallengeExpired,
    ChallengeAlreadyUsed,
    MalformedDigits,
    AuthenticationFailed,
    Throttled,
    ServiceUnavailable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LoginResponse {
    Success {
        ok: monostate::True,
        session: String,
    },
    Failure {
        ok: monostate::False,
        reason: FailureReason,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        next_challenge: Option<ChallengeView>,
    },
}

/// Literal `true` / `false` JSON fields.
pub mod monostate {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    macro_rules! literal_bool {
        ($name:ident, $value:expr) => {
            #[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
            pub struct $name;

            impl Serialize for $name {
                fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                    s.serialize_bool($value)
                }
            }

            impl<'de> Deserialize<'de> for $name {
                fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                    if bool::deserialize(d)? == $value {
                        Ok($name)
                    } else {
                        Err(serde::de::Error::custom(concat!("expected ", stringify!($value))))
                    }
                }
            }
        };
    }

    literal_bool!(True, true);
    literal_bool!(False, false);
}

impl LoginResponse {
    fn success(session: String) -> Self {
        LoginResponse::Success {
            ok: monostate::True,
            session,
        }
    }

    fn failure(reason: FailureReason, next_challenge: Option<ChallengeView>) -> Self {
        LoginResponse::Failure {
            ok: monostate::False,
            reason,
            next_challenge,
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, LoginResponse::Success { .. })
    }

    pub fn reason(&self) -> Option<FailureReason> {
        match self {
            LoginResponse::Failure { reason, .. } => Some(*reason),
            LoginResponse::Success { .. } => None,
        }
    }

    pub fn next_challenge(&self) -> Option<&ChallengeView> {
        match self {
            LoginResponse::Failure { next_challenge, .. } => next_challenge.as_ref(),
            LoginResponse::Success { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ServiceError {
    #[error("too many requests")]
    Throttled,
    #[error("credential store not loaded")]
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub store_size: usize,
}

/// Sliding-window request counter per source address.
#[derive(Debug)]
struct RateLimiter {
    limit: u32,
    window: Duration,
    hits: Mutex<HashMap<IpAddr, VecDeque<SystemTime>>>,
}

impl RateLimiter {
    fn allow(&self, source: IpAddr, now: SystemTime) -> bool {
        if self.limit == 0 {
            return true;
        }
        let mut hits = self.hits.lock().unwrap();
        let q = hits.entry(source).or_default();
        while q.front().is_some_and(|&t| t + self.window <= now) {
            q.pop_front();
        }
        if q.len() >= self.limit as usize {
            return false;
        }
        q.push_back(now);
        true
    }
}

#[derive(Debug, Clone)]
struct Session {
    expires_at: SystemTime,
}

pub struct AuthService {
    config: ServiceConfig,
    charset: Arc<CharacterSet>,
    store: Option<Arc<SharedStore>>,
    clock: Arc<dyn Clock>,
    rng: Mutex<StdRng>,
    challenges: Mutex<HashMap<String, Challenge>>,
    sessions: Mutex<HashMap<String, Session>>,
    limiter: RateLimiter,
}

impl std::fmt::Debug for AuthService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AuthService")
            .field("config", &self.config)
            .field("charset", &self.charset.id())
            .field("store_loaded", &self.store.is_some())
            .finish_non_exhaustive()
    }
}

fn random_token<R: RngCore + ?Sized>(rng: &mut R) -> String {
    let mut bytes = [0u8; 16];
    rng.fill_bytes(&mut bytes);
    hex::encode(bytes)
}

impl AuthService {
    /// A service over `store`, or with no store (every request answers
    /// unavailable). Randomness comes from an OS-seeded CSPRNG.
    pub fn new(config: ServiceConfig, charset: Arc<CharacterSet>, store: Option<Arc<SharedStore>>) -> Self {
        let limiter = RateLimiter {
            limit: config.rate_limit,
            window: config.rate_window,
            hits: Mutex::default(),
        };
        Self {
            config,
            charset,
            store,
            clock: Arc::new(SystemClock),
            rng: Mutex::new(StdRng::from_os_rng()),
            challenges: Mutex::default(),
            sessions: Mutex::default(),
            limiter,
        }
    }

    /// Serves a store, taking the charset from it.
    pub fn with_store(config: ServiceConfig, store: Arc<SharedStore>) -> Self {
        let charset = Arc::clone(store.snapshot().charset());
        Self::new(config, charset, Some(store))
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// Replaces the generator with a seeded one. For tests and demos only.
    pub fn with_seed(self, seed: u64) -> Self {
        *self.rng.lock().unwrap() = StdRng::seed_from_u64(seed);
        self
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn charset(&self) -> &Arc<CharacterSet> {
        &self.charset
    }

    pub fn store(&self) -> Option<&Arc<SharedStore>> {
        self.store.as_ref()
    }

    fn register(&self) -> Challenge {
        let now = self.clock.now();
        let (id, grid) = {
            let mut rng = self.rng.lock().unwrap();
            (random_token(&mut *rng), generate(&self.charset, &mut *rng))
        };
        let challenge = Challenge {
            id: id.clone(),
            grid,
            issued_at: now,
            expires_at: now + self.config.challenge_ttl,
            consumed: false,
        };
        let mut reg = self.challenges.lock().unwrap();
        // Keep tombstones one extra TTL so late replays still read as used/expired.
        let keep = self.config.challenge_ttl;
        reg.retain(|_, c| c.expires_at + keep > now);
        reg.insert(id, challenge.clone());
        challenge
    }

    /// Issues a fresh challenge to `source`.
    pub fn issue_challenge(&self, source: IpAddr) -> Result<ChallengeView, ServiceError> {
        if self.store.is_none() {
            return Err(ServiceError::Unavailable);
        }
        if !self.limiter.allow(source, self.clock.now()) {
            return Err(ServiceError::Throttled);
        }
        Ok(ChallengeView::of(&self.register()))
    }

    /// Marks the challenge used and hands back its grid when it was live.
    fn consume(&self, id: &str) -> Result<CodeGrid, FailureReason> {
        let now = self.clock.now();
        let mut reg = self.challenges.lock().unwrap();
        let c = reg.get_mut(id).ok_or(FailureReason::UnknownChallenge)?;
        if c.consumed {
            return Err(FailureReason::ChallengeAlreadyUsed);
        }
        c.consumed = true;
        if now >= c.expires_at {
            return Err(FailureReason::ChallengeExpired);
        }
        Ok(c.grid.clone())
    }

    pub fn login(&self, source: IpAddr, request: &LoginRequest) -> LoginResponse {
        let Some(store) = &self.store else {
            return LoginResponse::failure(FailureReason::ServiceUnavailable, None);
        };
        if !self.limiter.allow(source, self.clock.now()) {
            return LoginResponse::failure(FailureReason::Throttled, None);
        }
        let outcome = self.consume(&request.challenge_id).and_then(|grid| {
            let digits: DigitSequence = request
                .digits
                .parse()
                .map_err(|_| FailureReason::MalformedDigits)?;
            let snapshot = store.snapshot();
            let result = match (snapshot.mode(), request.username.as_deref()) {
                (StoreMode::UsernameScoped, Some(user)) => verify_for_user(&digits, &grid, &snapshot, user),
                (StoreMode::UsernameScoped, None) => return Err(FailureReason::AuthenticationFailed),
                (StoreMode::PasswordOnly, _) => verify_inverted(&digits, &grid, &snapshot),
            };
            if result.is_accepted() {
                Ok(())
            } else {
                Err(FailureReason::AuthenticationFailed)
            }
        });
        match outcome {
            Ok(()) => LoginResponse::success(self.open_session()),
            Err(reason) => LoginResponse::failure(reason, Some(ChallengeView::of(&self.register()))),
        }
    }

    fn open_session(&self) -> String {
        let token = random_token(&mut *self.rng.lock().unwrap());
        let expires_at = self.clock.now() + self.config.session_ttl;
        let mut sessions = self.sessions.lock().unwrap();
        let now = self.clock.now();
        sessions.retain(|_, s| s.expires_at > now);
        sessions.insert(token.clone(), Session { expires_at });
        token
    }

    pub fn session_valid(&self, token: &str) -> bool {
        let now = self.clock.now();
        self.sessions
            .lock()
            .unwrap()
            .get(token)
            .is_some_and(|s| s.expires_at > now)
    }

    /// Ends a session; unknown tokens are ignored.
    pub fn logout(&self, token: &str) {
        self.sessions.lock().unwrap().remove(token);
    }

    pub fn health(&self) -> Health {
        match &self.store {
            Some(s) => Health {
                status: "ok".into(),
                store_size: s.snapshot().len(),
            },
            None => Health {
                status: "unavailable".into(),
                store_size: 0,
            },
        }
    }

    /// Ids of challenges that can still be used.
    pub fn active_challenge_ids(&self) -> Vec<String> {
        let now = self.clock.now();
        self.challenges
            .lock()
            .unwrap()
            .values()
            .filter(|c| !c.consumed && c.expires_at > now)
            .map(|c| c.id.clone())
            .collect()
    }

    /// The registered challenge with this id, consumed or not.
    pub fn challenge(&self, id: &str) -> Option<Challenge> {
        self.challenges.lock().unwrap().get(id).cloned()
    }
}

/// Rebuilds a grid from a challenge payload, rejecting payloads that break
/// the frequency constraint.
pub fn grid_from_view(charset: Arc<CharacterSet>, view: &ChallengeView) -> Result<CodeGrid, crate::grid::GridError> {
    CodeGrid::from_cells(charset, &view.grid)
}
