//! Minimal blocking client for the simple query protocol. Used to mirror
//! tables from an upstream server and by the tests.

use super::protocol::{decode_backend, frontend, BackendMessage, ErrorFields, FieldDescription};
use bytes::BytesMut;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("{}: {} ({})", .0.severity, .0.message, .0.code)]
    Server(ErrorFields),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryResult {
    pub columns: Vec<FieldDescription>,
    pub rows: Vec<Vec<Option<String>>>,
    /// CommandComplete tag, or empty for an empty query.
    pub tag: String,
    pub notices: Vec<ErrorFields>,
}

pub struct Client {
    stream: TcpStream,
    buf: BytesMut,
    parameters: BTreeMap<String, String>,
    backend_key: Option<(i32, i32)>,
}

#[derive(Debug, Clone)]
pub struct ConnectOptions<'a> {
    pub host: &'a str,
    pub port: u16,
    pub user: &'a str,
    pub database: &'a str,
    pub password: Option<&'a str>,
    pub timeout: Duration,
}

impl Client {
    pub fn connect(opts: &ConnectOptions<'_>) -> Result<Client, ClientError> {
        let addrs: Vec<_> = (opts.host, opts.port).to_socket_addrs()?.collect();
        let mut last = None;
        let mut stream = None;
        for a in addrs {
            match TcpStream::connect_timeout(&a, opts.timeout) {
                Ok(s) => {
                    stream = Some(s);
                    break;
                }
                Err(e) => last = Some(e),
            }
        }
        let stream = match stream {
            Some(s) => s,
            None => {
                return Err(last
                    .unwrap_or_else(|| std::io::Error::new(std::io::ErrorKind::NotFound, "no address"))
                    .into())
            }
        };
        stream.set_read_timeout(Some(opts.timeout.max(Duration::from_secs(1)) * 60))?;
        stream.set_nodelay(true)?;
        let mut c = Client {
            stream,
            buf: BytesMut::with_capacity(8192),
            parameters: BTreeMap::new(),
            backend_key: None,
        };
        let mut out = BytesMut::new();
        frontend::startup(&mut out, &[("user", opts.user), ("database", opts.database)]);
        c.send(&out)?;
        loop {
            match c.read_message()? {
                BackendMessage::AuthenticationOk => {}
                BackendMessage::AuthenticationCleartextPassword => {
                    let pw = opts.password.ok_or_else(|| {
                        ClientError::Protocol("server asked for a password but none was given".into())
                    })?;
                    let mut out = BytesMut::new();
                    frontend::password(&mut out, pw);
                    c.send(&out)?;
                }
                BackendMessage::AuthenticationOther(code) => {
                    return Err(ClientError::Protocol(format!(
                        "unsupported authentication request {code} (only cleartext passwords are implemented)"
                    )))
                }
                BackendMessage::ParameterStatus { name, value } => {
                    c.parameters.insert(name, value);
                }
                BackendMessage::BackendKeyData { process_id, secret_key } => {
                    c.backend_key = Some((process_id, secret_key))
                }
                BackendMessage::ReadyForQuery(_) => return Ok(c),
                BackendMessage::ErrorResponse(e) => return Err(ClientError::Server(e)),
                BackendMessage::NoticeResponse(_) => {}
                other => return Err(ClientError::Protocol(format!("unexpected {other:?} during startup"))),
            }
        }
    }

    pub fn parameters(&self) -> &BTreeMap<String, String> {
        &self.parameters
    }

    pub fn backend_key(&self) -> Option<(i32, i32)> {
        self.backend_key
    }

    pub fn send(&mut self, bytes: &[u8]) -> Result<(), ClientError> {
        self.stream.write_all(bytes)?;
        Ok(())
    }

    pub fn read_message(&mut self) -> Result<BackendMessage, ClientError> {
        loop {
            if let Some(m) = decode_backend(&mut self.buf).map_err(|e| ClientError::Protocol(e.to_string()))? {
                return Ok(m);
            }
            let mut chunk = [0u8; 8192];
            let n = self.stream.read(&mut chunk)?;
            if n == 0 {
                return Err(ClientError::Io(std::io::Error::new(
                    std::io::ErrorKind::UnexpectedEof,
                    "server closed the connection",
                )));
            }
            self.buf.extend_from_slice(&chunk[..n]);
        }
    }

    /// Reads messages up to and including ReadyForQuery.
    pub fn read_until_ready(&mut self) -> Result<Vec<BackendMessage>, ClientError> {
        let mut out = Vec::new();
        loop {
            let m = self.read_message()?;
            let done = matches!(m, BackendMessage::ReadyForQuery(_));
            out.push(m);
            if done {
                return Ok(out);
            }
        }
    }

    /// Runs a simple query. On a server error the session is drained to
    /// ReadyForQuery and the error returned.
    pub fn simple_query(&mut self, sql: &str) -> Result<Vec<QueryResult>, ClientError> {
        let mut out = BytesMut::new();
        frontend::query(&mut out, sql);
        self.send(&out)?;
        let mut results = Vec::new();
        let mut current = QueryResult::default();
        let mut error = None;
        for m in self.read_until_ready()? {
            match m {
                BackendMessage::RowDescription(cols) => current.columns = cols,
                BackendMessage::DataRow(row) => current.rows.push(row),
                BackendMessage::NoticeResponse(n) => current.notices.push(n),
                BackendMessage::CommandComplete(tag) => {
                    current.tag = tag;
                    results.push(std::mem::take(&mut current));
                }
                BackendMessage::EmptyQueryResponse => results.push(std::mem::take(&mut current)),
                BackendMessage::ErrorResponse(e) => error = Some(e),
                BackendMessage::ReadyForQuery(_) | BackendMessage::ParameterStatus { .. } => {}
                other => return Err(ClientError::Protocol(format!("unexpected {other:?} in query response"))),
            }
        }
        match error {
            Some(e) => Err(ClientError::Server(e)),
            None => Ok(results),
        }
    }

    pub fn terminate(mut self) -> Result<(), ClientError> {
        let mut out = BytesMut::new();
        frontend::terminate(&mut out);
        self.send(&out)
    }
}
