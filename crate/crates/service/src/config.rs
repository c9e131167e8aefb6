//! Service settings: an optional TOML file, then environment overrides
//! (`PORT`, `STORE_PATH`, `MAX_FRAMES`, `WORKERS`).

use std::collections::BTreeMap;
use std::net::{IpAddr, Ipv4Addr};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid value for {var}: {value:?}")]
    Env { var: &'static str, value: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: IpAddr,
    pub port: u16,
    /// Patient store file; created on first write.
    pub store_path: PathBuf,
    /// Triage weights and risk mapping; built-in defaults when absent.
    pub triage_config: Option<PathBuf>,
    /// Largest frame count a vitals job may carry.
    pub max_frames: usize,
    /// Vitals jobs running at once.
    pub workers: usize,
    /// Request body cap, bytes. Inline base64 frames are large.
    pub max_body_bytes: usize,
    /// Extra dialog graphs by id, in addition to the bundled "screening".
    pub graphs: BTreeMap<String, PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            store_path: PathBuf::from("patients.json"),
            triage_config: None,
            max_frames: 3600,
            workers: std::thread::available_parallelism().map_or(2, |n| n.get()),
            max_body_bytes: 512 * 1024 * 1024,
            graphs: BTreeMap::new(),
        }
    }
}

impl ServiceConfig {
    /// Reads `file` when given, then applies the process environment.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match file {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        cfg.apply_env(std::env::vars())?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: Self = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies the recognised variables from `vars`; others are ignored.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (key, value) in vars {
            match key.as_str() {
                "PORT" => self.port = parse_env("PORT", &value)?,
                "STORE_PATH" => self.store_path = PathBuf::from(value),
                "MAX_FRAMES" => self.max_frames = parse_env("MAX_FRAMES", &value)?,
                "WORKERS" => self.workers = parse_env("WORKERS", &value)?,
                _ => {}
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        if self.max_frames < 2 {
            return Err(ConfigError::Invalid("max_frames must be at least 2".into()));
        }
        Ok(())
    }
}

fn parse_env<T: std::str::FromStr>(var: &'static str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::Env {
        var,
        value: value.to_string(),
    })
}
