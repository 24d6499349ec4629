//! PostgreSQL wire protocol (v3.0) subset. The message catalog is in
//! `docs/wire-protocol.md`.

pub mod client;
pub mod config;
pub mod protocol;
pub mod server;
pub mod session;

pub use client::{Client, ClientError, ConnectOptions, QueryResult};
pub use config::{ConfigError, ServerConfig, TableConfig};
pub use server::{Server, ServerError, ServerHandle};
pub use session::{AuthConfig, AuthMode, AuthState, Response, Session};
