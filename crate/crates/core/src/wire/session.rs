//! Transport-independent session state machine: one frontend message in,
//! a sequence of backend messages out.

use super::protocol::{BackendMessage, ErrorFields, FieldDescription, FrontendMessage, PROTOCOL_VERSION_3};
use crate::sqlfe::{Column, Engine, Outcome, PreparedStatement, SqlError, StatementResult};
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuthState {
    AwaitingStartup,
    AwaitingPassword,
    Ready,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AuthMode {
    #[default]
    Trust,
    /// Cleartext password checked against the configured user table.
    Password,
}

impl std::str::FromStr for AuthMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "trust" => Ok(AuthMode::Trust),
            "password" => Ok(AuthMode::Password),
            other => Err(format!("unknown auth mode '{other}' (expected trust or password)")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AuthConfig {
    pub mode: AuthMode,
    /// user name to password
    pub users: BTreeMap<String, String>,
}

impl AuthConfig {
    pub fn trust() -> Self {
        AuthConfig::default()
    }

    pub fn password(users: impl IntoIterator<Item = (String, String)>) -> Self {
        AuthConfig {
            mode: AuthMode::Password,
            users: users.into_iter().collect(),
        }
    }
}

/// Messages to send, and whether the connection must be closed afterwards.
#[derive(Debug, Default, PartialEq)]
pub struct Response {
    pub messages: Vec<BackendMessage>,
    pub close: bool,
}

#[derive(Debug)]
struct Portal {
    statement: PreparedStatement,
    /// Rows left over after a row-limited Execute.
    pending: Option<VecDeque<Vec<Option<String>>>>,
    sent: usize,
}

pub const SERVER_VERSION: &str = "10.4";

pub struct Session {
    process_id: i32,
    secret_key: i32,
    state: AuthState,
    parameters: BTreeMap<String, String>,
    engine: Arc<Engine>,
    auth: Arc<AuthConfig>,
    statements: HashMap<String, PreparedStatement>,
    portal: Option<Portal>,
    /// Set after an error in an extended-protocol cycle; input is discarded until Sync.
    skip_until_sync: bool,
}

fn fields(severity: &str, code: &str, message: impl Into<String>) -> ErrorFields {
    ErrorFields {
        severity: severity.into(),
        code: code.into(),
        message: message.into(),
    }
}

fn error(code: &str, message: impl Into<String>) -> BackendMessage {
    BackendMessage::ErrorResponse(fields("ERROR", code, message))
}

fn fatal(code: &str, message: impl Into<String>) -> BackendMessage {
    BackendMessage::ErrorResponse(fields("FATAL", code, message))
}

fn notice(message: impl Into<String>) -> BackendMessage {
    BackendMessage::NoticeResponse(fields("NOTICE", "00000", message))
}

fn sql_error(e: &SqlError) -> BackendMessage {
    error(e.sqlstate(), e.to_string())
}

fn row_description(cols: &[Column]) -> BackendMessage {
    BackendMessage::RowDescription(
        cols.iter()
            .map(|c| FieldDescription {
                name: c.name.clone(),
                type_oid: c.sql_type.oid(),
                type_size: c.sql_type.type_size(),
            })
            .collect(),
    )
}

impl Session {
    pub fn new(engine: Arc<Engine>, auth: Arc<AuthConfig>, process_id: i32, secret_key: i32) -> Self {
        Session {
            process_id,
            secret_key,
            state: AuthState::AwaitingStartup,
            parameters: BTreeMap::new(),
            engine,
            auth,
            statements: HashMap::new(),
            portal: None,
            skip_until_sync: false,
        }
    }

    pub fn state(&self) -> AuthState {
        self.state
    }

    pub fn process_id(&self) -> i32 {
        self.process_id
    }

    pub fn secret_key(&self) -> i32 {
        self.secret_key
    }

    /// Startup parameters sent by the client (`user`, `database`, ...).
    pub fn parameters(&self) -> &BTreeMap<String, String> {
        &self.parameters
    }

    pub fn handle(&mut self, msg: FrontendMessage) -> Response {
        let mut out = Response::default();
        match self.state {
            AuthState::Closed => out.close = true,
            AuthState::AwaitingStartup => self.on_startup(msg, &mut out),
            AuthState::AwaitingPassword => self.on_password(msg, &mut out),
            AuthState::Ready => self.on_ready(msg, &mut out),
        }
        if out.close {
            self.state = AuthState::Closed;
        }
        out
    }

    fn on_startup(&mut self, msg: FrontendMessage, out: &mut Response) {
        match msg {
            FrontendMessage::SslRequest | FrontendMessage::GssEncRequest => {
                out.messages.push(BackendMessage::EncryptionRefused);
            }
            FrontendMessage::CancelRequest { .. } => out.close = true,
            FrontendMessage::Startup { version, params } => {
                if version >> 16 != PROTOCOL_VERSION_3 >> 16 {
                    out.messages.push(fatal(
                        "0A000",
                        format!(
                            "unsupported frontend protocol {}.{}: server supports 3.0 to 3.0",
                            version >> 16,
                            version & 0xffff
                        ),
                    ));
                    out.close = true;
                    return;
                }
                self.parameters = params;
                let Some(user) = self.parameters.get("user").cloned() else {
                    out.messages
                        .push(fatal("28000", "no PostgreSQL user name specified in startup packet"));
                    out.close = true;
                    return;
                };
                match self.auth.mode {
                    AuthMode::Trust => self.complete_auth(out),
                    AuthMode::Password => {
                        log::debug!("session {}: password requested for {user}", self.process_id);
                        self.state = AuthState::AwaitingPassword;
                        out.messages.push(BackendMessage::AuthenticationCleartextPassword);
                    }
                }
            }
            _ => {
                out.messages.push(fatal("08P01", "expected a startup message"));
                out.close = true;
            }
        }
    }

    fn on_password(&mut self, msg: FrontendMessage, out: &mut Response) {
        let user = self.parameters.get("user").cloned().unwrap_or_default();
        match msg {
            FrontendMessage::Password(given) if self.auth.users.get(&user) == Some(&given) => {
                self.complete_auth(out);
            }
            FrontendMessage::Password(_) => {
                out.messages.push(fatal(
                    "28P01",
                    format!("password authentication failed for user \"{user}\""),
                ));
                out.close = true;
            }
            FrontendMessage::Terminate => out.close = true,
            _ => {
                out.messages.push(fatal("08P01", "expected a password message"));
                out.close = true;
            }
        }
    }

    fn complete_auth(&mut self, out: &mut Response) {
        self.state = AuthState::Ready;
        out.messages.push(BackendMessage::AuthenticationOk);
        let app = self.parameters.get("application_name").cloned().unwrap_or_default();
        for (name, value) in [
            ("server_version", SERVER_VERSION),
            ("server_encoding", "UTF8"),
            ("client_encoding", "UTF8"),
            ("DateStyle", "ISO, MDY"),
            ("TimeZone", "UTC"),
            ("integer_datetimes", "on"),
            ("standard_conforming_strings", "on"),
            ("application_name", app.as_str()),
        ] {
            out.messages.push(BackendMessage::ParameterStatus {
                name: name.into(),
                value: value.into(),
            });
        }
        out.messages.push(BackendMessage::BackendKeyData {
            process_id: self.process_id,
            secret_key: self.secret_key,
        });
        out.messages.push(BackendMessage::ReadyForQuery(b'I'));
    }

    fn on_ready(&mut self, msg: FrontendMessage, out: &mut Response) {
        if self.skip_until_sync && !matches!(msg, FrontendMessage::Sync | FrontendMessage::Terminate) {
            return;
        }
        match msg {
            FrontendMessage::Query(sql) => {
                self.portal = None;
                for r in self.engine.execute_script(&sql) {
                    match r {
                        Ok(res) => emit_result(res, true, out),
                        Err(e) => out.messages.push(sql_error(&e)),
                    }
                }
                out.messages.push(BackendMessage::ReadyForQuery(b'I'));
            }
            FrontendMessage::Parse {
                name,
                query,
                param_types,
            } => self.extended(out, |s, out| s.on_parse(name, &query, &param_types, out)),
            FrontendMessage::Bind {
                portal,
                statement,
                params,
                result_formats,
                ..
            } => self.extended(out, |s, out| {
                s.on_bind(&portal, &statement, params.len(), &result_formats, out)
            }),
            FrontendMessage::Describe { kind, name } => self.extended(out, |s, out| s.on_describe(kind, &name, out)),
            FrontendMessage::Execute { portal, max_rows } => {
                self.extended(out, |s, out| s.on_execute(&portal, max_rows, out))
            }
            FrontendMessage::Close { kind, name } => self.extended(out, |s, out| {
                match kind {
                    b'S' => {
                        s.statements.remove(&name);
                    }
                    b'P' => {
                        if name.is_empty() {
                            s.portal = None;
                        }
                    }
                    other => return Err(error("08P01", format!("invalid Close kind '{}'", other as char))),
                }
                out.messages.push(BackendMessage::CloseComplete);
                Ok(())
            }),
            FrontendMessage::Sync => {
                self.skip_until_sync = false;
                self.portal = None;
                out.messages.push(BackendMessage::ReadyForQuery(b'I'));
            }
            FrontendMessage::Flush => {}
            FrontendMessage::Terminate => out.close = true,
            FrontendMessage::Unknown { tag } => {
                out.messages
                    .push(fatal("08P01", format!("invalid frontend message type {}", tag)));
                out.close = true;
            }
            FrontendMessage::Password(_)
            | FrontendMessage::Startup { .. }
            | FrontendMessage::SslRequest
            | FrontendMessage::GssEncRequest
            | FrontendMessage::CancelRequest { .. } => {
                out.messages
                    .push(fatal("08P01", "unexpected message after authentication"));
                out.close = true;
            }
        }
    }

    /// Runs one extended-protocol step; an error is reported once and the
    /// rest of the cycle is skipped until Sync.
    fn extended(
        &mut self,
        out: &mut Response,
        step: impl FnOnce(&mut Self, &mut Response) -> Result<(), BackendMessage>,
    ) {
        if let Err(e) = step(self, out) {
            out.messages.push(e);
            self.skip_until_sync = true;
        }
    }

    fn on_parse(
        &mut self,
        name: String,
        query: &str,
        param_types: &[u32],
        out: &mut Response,
    ) -> Result<(), BackendMessage> {
        if !param_types.is_empty() {
            return Err(error("0A000", "statement parameters are not supported"));
        }
        if !name.is_empty() && self.statements.contains_key(&name) {
            return Err(error("42P05", format!("prepared statement \"{name}\" already exists")));
        }
        let prepared = self.engine.prepare(query).map_err(|e| sql_error(&e))?;
        self.statements.insert(name, prepared);
        out.messages.push(BackendMessage::ParseComplete);
        Ok(())
    }

    fn on_bind(
        &mut self,
        portal: &str,
        statement: &str,
        param_count: usize,
        result_formats: &[i16],
        out: &mut Response,
    ) -> Result<(), BackendMessage> {
        if !portal.is_empty() {
            return Err(error("0A000", "named portals are not supported"));
        }
        let stmt = self
            .statements
            .get(statement)
            .ok_or_else(|| error("26000", format!("prepared statement \"{statement}\" does not exist")))?;
        if param_count != 0 {
            return Err(error(
                "08P01",
                format!(
                    "bind message supplies {param_count} parameters, but prepared statement \"{statement}\" requires 0"
                ),
            ));
        }
        if result_formats.iter().any(|&f| f != 0) {
            return Err(error("0A000", "binary result format is not supported"));
        }
        self.portal = Some(Portal {
            statement: stmt.clone(),
            pending: None,
            sent: 0,
        });
        out.messages.push(BackendMessage::BindComplete);
        Ok(())
    }

    fn on_describe(&mut self, kind: u8, name: &str, out: &mut Response) -> Result<(), BackendMessage> {
        let stmt = match kind {
            b'S' => {
                let s = self
                    .statements
                    .get(name)
                    .ok_or_else(|| error("26000", format!("prepared statement \"{name}\" does not exist")))?;
                out.messages.push(BackendMessage::ParameterDescription(Vec::new()));
                s
            }
            b'P' => match &self.portal {
                Some(p) if name.is_empty() => &p.statement,
                _ => return Err(error("34000", format!("portal \"{name}\" does not exist"))),
            },
            other => return Err(error("08P01", format!("invalid Describe kind '{}'", other as char))),
        };
        match self.engine.describe(stmt).map_err(|e| sql_error(&e))? {
            Some(cols) => out.messages.push(row_description(&cols)),
            None => out.messages.push(BackendMessage::NoData),
        }
        Ok(())
    }

    fn on_execute(&mut self, portal: &str, max_rows: i32, out: &mut Response) -> Result<(), BackendMessage> {
        let p = match &mut self.portal {
            Some(p) if portal.is_empty() => p,
            _ => return Err(error("34000", format!("portal \"{portal}\" does not exist"))),
        };
        if p.pending.is_none() {
            let res = self.engine.execute_prepared(&p.statement).map_err(|e| sql_error(&e))?;
            for n in &res.notices {
                out.messages.push(notice(n.clone()));
            }
            match res.outcome {
                Outcome::Rows(rows) => {
                    p.pending = Some(
                        rows.text_rows()
                            .into_iter()
                            .map(|r| r.into_iter().map(Some).collect())
                            .collect(),
                    );
                }
                other => {
                    emit_result(
                        StatementResult {
                            outcome: other,
                            notices: Vec::new(),
                        },
                        false,
                        out,
                    );
                    return Ok(());
                }
            }
        }
        let pending = p.pending.as_mut().expect("filled above");
        let take = if max_rows > 0 {
            (max_rows as usize).min(pending.len())
        } else {
            pending.len()
        };
        for row in pending.drain(..take) {
            out.messages.push(BackendMessage::DataRow(row));
        }
        p.sent += take;
        if max_rows > 0 && !pending.is_empty() {
            out.messages.push(BackendMessage::PortalSuspended);
        } else {
            out.messages
                .push(BackendMessage::CommandComplete(format!("SELECT {}", p.sent)));
        }
        Ok(())
    }
}

fn emit_result(res: StatementResult, with_description: bool, out: &mut Response) {
    for n in res.notices {
        out.messages.push(notice(n));
    }
    match res.outcome {
        Outcome::Rows(rows) => {
            if with_description {
                out.messages.push(row_description(&rows.columns));
            }
            let tag = rows.command_tag();
            for r in rows.text_rows() {
                out.messages
                    .push(BackendMessage::DataRow(r.into_iter().map(Some).collect()));
            }
            out.messages.push(BackendMessage::CommandComplete(tag));
        }
        Outcome::Command(tag) => out.messages.push(BackendMessage::CommandComplete(tag)),
        Outcome::Empty => out.messages.push(BackendMessage::EmptyQueryResponse),
    }
}
