//! Server configuration: a TOML file with environment overrides.
//!
//! ```toml
//! store = "/var/lib/terra/store"
//! gazetteer = "/var/lib/terra/places.csv"   # optional
//! bind = "127.0.0.1:8080"
//! test_mode = false
//! ```
//!
//! `TERRA_STORE`, `TERRA_GAZETTEER`, `TERRA_BIND` and `TERRA_TEST_MODE`
//! override the corresponding keys.

use std::path::{Path, PathBuf};

use serde::Deserialize;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value {value:?} for {key}")]
    Value { key: &'static str, value: String },
    #[error("no tile store configured (set `store` or TERRA_STORE)")]
    MissingStore,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default)]
    pub store: Option<PathBuf>,
    #[serde(default)]
    pub gazetteer: Option<PathBuf>,
    #[serde(default = "default_bind")]
    pub bind: String,
    /// Emit PNG instead of JPEG from the map endpoints so output is
    /// byte-reproducible.
    #[serde(default)]
    pub test_mode: bool,
}

fn default_bind() -> String {
    DEFAULT_BIND.to_string()
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { store: None, gazetteer: None, bind: default_bind(), test_mode: false }
    }
}

fn parse_flag(value: &str) -> Option<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" | "" => Some(false),
        _ => None,
    }
}

impl ServiceConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` if given, then applies process environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.to_path_buf(), source })?;
                Self::from_toml_str(&text)?
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = lookup("TERRA_STORE") {
            self.store = Some(v.into());
        }
        if let Some(v) = lookup("TERRA_GAZETTEER") {
            self.gazetteer = if v.is_empty() { None } else { Some(v.into()) };
        }
        if let Some(v) = lookup("TERRA_BIND") {
            self.bind = v;
        }
        if let Some(v) = lookup("TERRA_TEST_MODE") {
            self.test_mode = parse_flag(&v).ok_or(ConfigError::Value { key: "TERRA_TEST_MODE", value: v })?;
        }
        Ok(())
    }
}
