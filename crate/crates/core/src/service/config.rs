//! Service configuration: a TOML file plus `GRIDPASS_*` environment
//! overrides.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! store_path = "gridpass.db"
//! charset = "default80"
//! challenge_ttl_secs = 120
//! session_ttl_secs = 3600
//! rate_limit_per_minute = 10
//! ```

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use super::ServiceConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("environment variable {name}: {message}")]
    Env { name: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: String,
    pub store_path: PathBuf,
    pub charset: String,
    pub challenge_ttl_secs: u64,
    pub session_ttl_secs: u64,
    /// 0 disables rate limiting.
    pub rate_limit_per_minute: u32,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            store_path: "gridpass.db".into(),
            charset: "default80".into(),
            challenge_ttl_secs: 120,
            session_ttl_secs: 3600,
            rate_limit_per_minute: 10,
        }
    }
}

fn parse_env<T: std::str::FromStr>(name: &'static str, raw: String) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e: T::Err| ConfigError::Env {
        name,
        message: e.to_string(),
    })
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` when given (defaults otherwise), then applies the
    /// process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => Self::from_toml(&std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.to_path_buf(),
                source,
            })?)?,
            None => Self::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        Ok(config)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = var("GRIDPASS_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = var("GRIDPASS_STORE") {
            self.store_path = v.into();
        }
        if let Some(v) = var("GRIDPASS_CHARSET") {
            self.charset = v;
        }
        if let Some(v) = var("GRIDPASS_CHALLENGE_TTL") {
            self.challenge_ttl_secs = parse_env("GRIDPASS_CHALLENGE_TTL", v)?;
        }
        if let Some(v) = var("GRIDPASS_SESSION_TTL") {
            self.session_ttl_secs = parse_env("GRIDPASS_SESSION_TTL", v)?;
        }
        if let Some(v) = var("GRIDPASS_RATE_LIMIT") {
            self.rate_limit_per_minute = parse_env("GRIDPASS_RATE_LIMIT", v)?;
        }
        Ok(())
    }

    pub fn service_config(&self) -> ServiceConfig {
        ServiceConfig {
            challenge_ttl: Duration::from_secs(self.challenge_ttl_secs),
            session_ttl: Duration::from_secs(self.session_ttl_secs),
            rate_limit: self.rate_limit_per_minute,
            rate_window: Duration::from_secs(60),
        }
    }
}
