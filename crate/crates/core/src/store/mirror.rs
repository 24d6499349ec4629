use super::{check_unique, is_identifier, GeometryRecord, StoreError};
use crate::geometry::parse_wkt;
use crate::wire::{Client, ClientError, ConnectOptions};
use std::time::Duration;

/// Connection settings for an upstream PostgreSQL-protocol server.
#[derive(Clone, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct UpstreamDsn {
    pub host: String,
    #[serde(default = "default_port")]
    pub port: u16,
    pub database: String,
    pub user: String,
    #[serde(default)]
    pub password: Option<String>,
    #[serde(default = "default_timeout")]
    pub connect_timeout_secs: u64,
}

fn default_port() -> u16 {
    5432
}

fn default_timeout() -> u64 {
    10
}

impl UpstreamDsn {
    pub fn new(host: impl Into<String>, port: u16, database: impl Into<String>, user: impl Into<String>) -> Self {
        UpstreamDsn {
            host: host.into(),
            port,
            database: database.into(),
            user: user.into(),
            password: None,
            connect_timeout_secs: default_timeout(),
        }
    }

    pub fn with_password(mut self, password: impl Into<String>) -> Self {
        self.password = Some(password.into());
        self
    }
}

impl std::fmt::Debug for UpstreamDsn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UpstreamDsn")
            .field("host", &self.host)
            .field("port", &self.port)
            .field("database", &self.database)
            .field("user", &self.user)
            .field("password", &self.password.as_ref().map(|_| "***"))
            .finish()
    }
}

pub(super) fn fetch(
    dsn: &UpstreamDsn,
    source_table: &str,
    id_column: &str,
    geom_column: &str,
) -> Result<Vec<GeometryRecord>, StoreError> {
    for name in [source_table, id_column, geom_column] {
        if !is_identifier(name) {
            return Err(StoreError::InvalidIdentifier(name.into()));
        }
    }
    let opts = ConnectOptions {
        host: &dsn.host,
        port: dsn.port,
        user: &dsn.user,
        database: &dsn.database,
        password: dsn.password.as_deref(),
        timeout: Duration::from_secs(dsn.connect_timeout_secs.max(1)),
    };
    let upstream = |e: ClientError| match e {
        ClientError::Server(f) => StoreError::Upstream {
            code: f.code,
            message: f.message,
        },
        other => StoreError::ConnectionFailed(other.to_string()),
    };
    let mut client = Client::connect(&opts).map_err(upstream)?;
    let sql = format!("SELECT {id_column}, {geom_column} FROM {source_table}");
    let mut results = client.simple_query(&sql).map_err(upstream)?;
    let _ = client.terminate();

    let result = results.pop().ok_or_else(|| StoreError::Upstream {
        code: "XX000".into(),
        message: "upstream returned no result set".into(),
    })?;
    let mut records = Vec::with_capacity(result.rows.len());
    for (i, row) in result.rows.into_iter().enumerate() {
        let line = i as u64 + 1;
        let [Some(id), Some(wkt)] = <[Option<String>; 2]>::try_from(row).map_err(|r| StoreError::Malformed {
            line,
            message: format!("expected 2 columns, got {}", r.len()),
        })?
        else {
            return Err(StoreError::Malformed {
                line,
                message: "NULL id or geometry".into(),
            });
        };
        let id: i64 = id.trim().parse().map_err(|_| StoreError::Malformed {
            line,
            message: format!("invalid id '{id}'"),
        })?;
        let geometry = parse_wkt(&wkt).map_err(|source| StoreError::Parse { line, source })?;
        records.push(GeometryRecord { id, geometry });
    }
    check_unique(&records)?;
    Ok(records)
}
