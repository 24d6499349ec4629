//! Server configuration file.
//!
//! ```toml
//! listen_addr = "127.0.0.1"
//! port = 5433
//! auth_mode = "password"          # or "trust"
//! backend = "parallel"            # or "sequential"
//! worker_count = 8
//! shutdown_deadline_secs = 10
//!
//! [users]
//! analyst = "secret"
//!
//! [[tables]]
//! name = "drills"
//! csv = "data/drills.csv"
//!
//! [[tables]]
//! name = "ores"
//! geom_column = "shape"
//! source_table = "ore_bodies"
//! id_column = "id"
//! upstream = { host = "db", port = 5432, database = "mine", user = "reader", password = "x" }
//! ```

use super::session::{AuthConfig, AuthMode};
use crate::kernels::{Backend, ExecutorConfig, DEFAULT_CHUNK_SIZE};
use crate::store::{Store, StoreError, UpstreamDsn, DEFAULT_GEOM_COLUMN};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const PORT_ENV: &str = "SPATIAL3D_PORT";
pub const AUTH_MODE_ENV: &str = "SPATIAL3D_AUTH_MODE";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerConfig {
    pub listen_addr: String,
    pub port: u16,
    pub auth_mode: AuthMode,
    pub users: BTreeMap<String, String>,
    pub backend: Backend,
    pub worker_count: usize,
    pub chunk_size: usize,
    pub shutdown_deadline_secs: u64,
    pub tables: Vec<TableConfig>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            listen_addr: "127.0.0.1".into(),
            port: 5433,
            auth_mode: AuthMode::Trust,
            users: BTreeMap::new(),
            backend: Backend::Parallel,
            worker_count: std::thread::available_parallelism().map_or(1, |n| n.get()),
            chunk_size: DEFAULT_CHUNK_SIZE,
            shutdown_deadline_secs: 10,
            tables: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub name: String,
    #[serde(default)]
    pub geom_column: Option<String>,
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub upstream: Option<UpstreamDsn>,
    /// Upstream table name; defaults to `name`.
    #[serde(default)]
    pub source_table: Option<String>,
    #[serde(default)]
    pub id_column: Option<String>,
}

impl<'de> Deserialize<'de> for Backend {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("could not read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("table {table}: {source}")]
    Load {
        table: String,
        #[source]
        source: StoreError,
    },
}

impl ServerConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ServerConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative CSV paths are resolved against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            for t in &mut cfg.tables {
                if let Some(csv) = &mut t.csv {
                    if csv.is_relative() {
                        *csv = dir.join(&*csv);
                    }
                }
            }
        }
        Ok(cfg)
    }

    /// Applies `SPATIAL3D_PORT` and `SPATIAL3D_AUTH_MODE` from the given lookup.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(p) = get(PORT_ENV) {
            self.port = p
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{PORT_ENV}={p} is not a port number")))?;
        }
        if let Some(m) = get(AUTH_MODE_ENV) {
            self.auth_mode = m.parse().map_err(ConfigError::Invalid)?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.worker_count == 0 {
            return Err(ConfigError::Invalid("worker_count must be positive".into()));
        }
        if self.chunk_size == 0 {
            return Err(ConfigError::Invalid("chunk_size must be positive".into()));
        }
        if self.auth_mode == AuthMode::Password && self.users.is_empty() {
            return Err(ConfigError::Invalid(
                "auth_mode = \"password\" needs at least one entry in [users]".into(),
            ));
        }
        for t in &self.tables {
            match (&t.csv, &t.upstream) {
                (Some(_), None) | (None, Some(_)) => {}
                _ => {
                    return Err(ConfigError::Invalid(format!(
                        "table {} needs exactly one of csv or upstream",
                        t.name
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn executor(&self) -> ExecutorConfig {
        let base = match self.backend {
            Backend::Sequential => ExecutorConfig::sequential(),
            Backend::Parallel => ExecutorConfig::parallel(self.worker_count),
        };
        base.with_chunk_size(self.chunk_size)
    }

    pub fn auth(&self) -> AuthConfig {
        AuthConfig {
            mode: self.auth_mode,
            users: self.users.clone(),
        }
    }

    /// Loads every configured table into `store`.
    pub fn load_tables(&self, store: &Store) -> Result<(), ConfigError> {
        for t in &self.tables {
            let geom = t.geom_column.as_deref().unwrap_or(DEFAULT_GEOM_COLUMN);
            let loaded = match (&t.csv, &t.upstream) {
                (Some(path), _) => store.load_csv_with_column(&t.name, path, geom),
                (None, Some(dsn)) => store.mirror_upstream(
                    &t.name,
                    dsn,
                    t.source_table.as_deref().unwrap_or(&t.name),
                    t.id_column.as_deref().unwrap_or("id"),
                    geom,
                ),
                (None, None) => unreachable!("validated"),
            };
            let table = loaded.map_err(|source| ConfigError::Load {
                table: t.name.clone(),
                source,
            })?;
            log::info!("loaded table {} ({} records)", table.name(), table.len());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_example() {
        let cfg = ServerConfig::from_toml(
            r#"
            listen_addr = "0.0.0.0"
            port = 6000
            auth_mode = "password"
            backend = "sequential"
            worker_count = 2
            [users]
            a = "b"
            [[tables]]
            name = "drills"
            csv = "drills.csv"
            [[tables]]
            name = "ores"
            geom_column = "shape"
            upstream = { host = "db", port = 5432, database = "mine", user = "r" }
            "#,
        )
        .unwrap();
        assert_eq!(cfg.port, 6000);
        assert_eq!(cfg.auth_mode, AuthMode::Password);
        assert_eq!(cfg.executor(), ExecutorConfig::sequential());
        assert_eq!(cfg.tables.len(), 2);
        assert_eq!(cfg.tables[1].upstream.as_ref().unwrap().host, "db");
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ServerConfig::from_toml("port = 'x'").is_err());
        assert!(ServerConfig::from_toml("prot = 1").is_err());
        assert!(ServerConfig::from_toml("auth_mode = 'password'").is_err());
        assert!(ServerConfig::from_toml("worker_count = 0").is_err());
        assert!(ServerConfig::from_toml("[[tables]]\nname = 't'").is_err());
        assert!(ServerConfig::from_toml("backend = 'gpu'").is_err());
    }

    #[test]
    fn env_overrides() {
        let mut cfg = ServerConfig {
            users: [("u".into(), "p".into())].into(),
            ..ServerConfig::default()
        };
        cfg.apply_env(|k| match k {
            PORT_ENV => Some("7777".into()),
            AUTH_MODE_ENV => Some("password".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.port, 7777);
        assert_eq!(cfg.auth_mode, AuthMode::Password);
        assert!(cfg.apply_env(|k| (k == PORT_ENV).then(|| "99999".into())).is_err());
    }
}
