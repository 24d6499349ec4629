//! PostgreSQL v3 message framing.
//!
//! Frontend messages are `tag:u8, len:i32, payload` where `len` counts itself
//! but not the tag. The very first message of a connection (startup, SSL
//! request, cancel request) has no tag byte.

use bytes::{Buf, BufMut, BytesMut};
use std::collections::BTreeMap;

pub const PROTOCOL_VERSION_3: i32 = 196_608;
pub const SSL_REQUEST_CODE: i32 = 80_877_103;
pub const GSSENC_REQUEST_CODE: i32 = 80_877_104;
pub const CANCEL_REQUEST_CODE: i32 = 80_877_102;

/// Upper bound on a single message, to refuse absurd allocations.
pub const MAX_MESSAGE_LEN: usize = 64 * 1024 * 1024;

pub mod oid {
    pub const BOOL: u32 = 16;
    pub const INT8: u32 = 20;
    pub const INT4: u32 = 23;
    pub const TEXT: u32 = 25;
    pub const FLOAT8: u32 = 701;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("invalid message length {0}")]
    BadLength(i64),
    #[error("malformed {0} message")]
    Malformed(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrontendMessage {
    Startup {
        version: i32,
        params: BTreeMap<String, String>,
    },
    SslRequest,
    GssEncRequest,
    CancelRequest {
        process_id: i32,
        secret_key: i32,
    },
    Password(String),
    Query(String),
    Parse {
        name: String,
        query: String,
        param_types: Vec<u32>,
    },
    Bind {
        portal: String,
        statement: String,
        param_formats: Vec<i16>,
        params: Vec<Option<Vec<u8>>>,
        result_formats: Vec<i16>,
    },
    Describe {
        kind: u8,
        name: String,
    },
    Execute {
        portal: String,
        max_rows: i32,
    },
    Close {
        kind: u8,
        name: String,
    },
    Sync,
    Flush,
    Terminate,
    Unknown {
        tag: u8,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDescription {
    pub name: String,
    pub type_oid: u32,
    pub type_size: i16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorFields {
    pub severity: String,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendMessage {
    /// The single unframed `N` byte answering an SSL or GSSAPI encryption request.
    EncryptionRefused,
    AuthenticationOk,
    AuthenticationCleartextPassword,
    /// Any other authentication request (seen only by the client).
    AuthenticationOther(i32),
    ParameterStatus {
        name: String,
        value: String,
    },
    BackendKeyData {
        process_id: i32,
        secret_key: i32,
    },
    ReadyForQuery(u8),
    RowDescription(Vec<FieldDescription>),
    DataRow(Vec<Option<String>>),
    CommandComplete(String),
    EmptyQueryResponse,
    ErrorResponse(ErrorFields),
    NoticeResponse(ErrorFields),
    ParseComplete,
    BindComplete,
    CloseComplete,
    NoData,
    PortalSuspended,
    ParameterDescription(Vec<u32>),
}

/// Incremental frontend decoder. Feed it whatever the socket produced; it
/// yields complete messages and leaves partial ones in the buffer.
#[derive(Debug, Clone)]
pub struct FrontendDecoder {
    in_startup: bool,
}

impl Default for FrontendDecoder {
    fn default() -> Self {
        FrontendDecoder { in_startup: true }
    }
}

impl FrontendDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn decode(&mut self, buf: &mut BytesMut) -> Result<Option<FrontendMessage>, ProtocolError> {
        if self.in_startup {
            if buf.len() < 4 {
                return Ok(None);
            }
            let len = i32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) as i64;
            if !(8..=MAX_MESSAGE_LEN as i64).contains(&len) {
                return Err(ProtocolError::BadLength(len));
            }
            let len = len as usize;
            if buf.len() < len {
                buf.reserve(len - buf.len());
                return Ok(None);
            }
            let mut body = buf.split_to(len);
            body.advance(4);
            let msg = decode_startup(&mut body)?;
            if matches!(msg, FrontendMessage::Startup { .. }) {
                self.in_startup = false;
            }
            return Ok(Some(msg));
        }

        if buf.len() < 5 {
            return Ok(None);
        }
        let tag = buf[0];
        let len = i32::from_be_bytes([buf[1], buf[2], buf[3], buf[4]]) as i64;
        if !(4..=MAX_MESSAGE_LEN as i64).contains(&len) {
            return Err(ProtocolError::BadLength(len));
        }
        let total = 1 + len as usize;
        if buf.len() < total {
            buf.reserve(total - buf.len());
            return Ok(None);
        }
        let mut body = buf.split_to(total);
        body.advance(5);
        decode_tagged(tag, &mut body).map(Some)
    }
}

fn decode_startup(body: &mut BytesMut) -> Result<FrontendMessage, ProtocolError> {
    let code = get_i32(body, "startup")?;
    match code {
        SSL_REQUEST_CODE => Ok(FrontendMessage::SslRequest),
        GSSENC_REQUEST_CODE => Ok(FrontendMessage::GssEncRequest),
        CANCEL_REQUEST_CODE => Ok(FrontendMessage::CancelRequest {
            process_id: get_i32(body, "cancel request")?,
            secret_key: get_i32(body, "cancel request")?,
        }),
        version => {
            let mut params = BTreeMap::new();
            if version == PROTOCOL_VERSION_3 {
                loop {
                    let key = get_cstr(body, "startup")?;
                    if key.is_empty() {
                        break;
                    }
                    let value = get_cstr(body, "startup")?;
                    params.insert(key, value);
                }
            }
            Ok(FrontendMessage::Startup { version, params })
        }
    }
}

fn decode_tagged(tag: u8, body: &mut BytesMut) -> Result<FrontendMessage, ProtocolError> {
    Ok(match tag {
        b'Q' => FrontendMessage::Query(get_cstr(body, "Query")?),
        b'p' => FrontendMessage::Password(get_cstr(body, "PasswordMessage")?),
        b'P' => {
            let name = get_cstr(body, "Parse")?;
            let query = get_cstr(body, "Parse")?;
            let n = get_i16(body, "Parse")?;
            let mut param_types = Vec::new();
            for _ in 0..n.max(0) {
                param_types.push(get_i32(body, "Parse")? as u32);
            }
            FrontendMessage::Parse {
                name,
                query,
                param_types,
            }
        }
        b'B' => {
            let portal = get_cstr(body, "Bind")?;
            let statement = get_cstr(body, "Bind")?;
            let nf = get_i16(body, "Bind")?;
            let mut param_formats = Vec::new();
            for _ in 0..nf.max(0) {
                param_formats.push(get_i16(body, "Bind")?);
            }
            let np = get_i16(body, "Bind")?;
            let mut params = Vec::new();
            for _ in 0..np.max(0) {
                let len = get_i32(body, "Bind")?;
                if len < 0 {
                    params.push(None);
                } else {
                    let len = len as usize;
                    if body.len() < len {
                        return Err(ProtocolError::Malformed("Bind"));
                    }
                    params.push(Some(body.split_to(len).to_vec()));
                }
            }
            let nr = get_i16(body, "Bind")?;
            let mut result_formats = Vec::new();
            for _ in 0..nr.max(0) {
                result_formats.push(get_i16(body, "Bind")?);
            }
            FrontendMessage::Bind {
                portal,
                statement,
                param_formats,
                params,
                result_formats,
            }
        }
        b'D' => FrontendMessage::Describe {
            kind: get_u8(body, "Describe")?,
            name: get_cstr(body, "Describe")?,
        },
        b'E' => FrontendMessage::Execute {
            portal: get_cstr(body, "Execute")?,
            max_rows: get_i32(body, "Execute")?,
        },
        b'C' => FrontendMessage::Close {
            kind: get_u8(body, "Close")?,
            name: get_cstr(body, "Close")?,
        },
        b'S' => FrontendMessage::Sync,
        b'H' => FrontendMessage::Flush,
        b'X' => FrontendMessage::Terminate,
        other => FrontendMessage::Unknown { tag: other },
    })
}

fn get_u8(b: &mut BytesMut, what: &'static str) -> Result<u8, ProtocolError> {
    if b.is_empty() {
        return Err(ProtocolError::Malformed(what));
    }
    Ok(b.get_u8())
}

fn get_i16(b: &mut BytesMut, what: &'static str) -> Result<i16, ProtocolError> {
    if b.len() < 2 {
        return Err(ProtocolError::Malformed(what));
    }
    Ok(b.get_i16())
}

fn get_i32(b: &mut BytesMut, what: &'static str) -> Result<i32, ProtocolError> {
    if b.len() < 4 {
        return Err(ProtocolError::Malformed(what));
    }
    Ok(b.get_i32())
}

fn get_cstr(b: &mut BytesMut, what: &'static str) -> Result<String, ProtocolError> {
    let nul = b.iter().position(|&c| c == 0).ok_or(ProtocolError::Malformed(what))?;
    let s = String::from_utf8(b.split_to(nul).to_vec()).map_err(|_| ProtocolError::Malformed(what))?;
    b.advance(1);
    Ok(s)
}

fn put_cstr(out: &mut BytesMut, s: &str) {
    out.put_slice(s.as_bytes());
    out.put_u8(0);
}

/// Writes `tag`, a length placeholder, the body from `f`, then patches the length.
fn framed(out: &mut BytesMut, tag: u8, f: impl FnOnce(&mut BytesMut)) {
    out.put_u8(tag);
    let at = out.len();
    out.put_i32(0);
    f(out);
    let len = (out.len() - at) as i32;
    out[at..at + 4].copy_from_slice(&len.to_be_bytes());
}

fn put_fields(out: &mut BytesMut, e: &ErrorFields) {
    out.put_u8(b'S');
    put_cstr(out, &e.severity);
    out.put_u8(b'V');
    put_cstr(out, &e.severity);
    out.put_u8(b'C');
    put_cstr(out, &e.code);
    out.put_u8(b'M');
    put_cstr(out, &e.message);
    out.put_u8(0);
}

impl BackendMessage {
    pub fn encode(&self, out: &mut BytesMut) {
        use BackendMessage::*;
        match self {
            EncryptionRefused => out.put_u8(b'N'),
            AuthenticationOk => framed(out, b'R', |o| o.put_i32(0)),
            AuthenticationCleartextPassword => framed(out, b'R', |o| o.put_i32(3)),
            AuthenticationOther(code) => framed(out, b'R', |o| o.put_i32(*code)),
            ParameterStatus { name, value } => framed(out, b'S', |o| {
                put_cstr(o, name);
                put_cstr(o, value);
            }),
            BackendKeyData { process_id, secret_key } => framed(out, b'K', |o| {
                o.put_i32(*process_id);
                o.put_i32(*secret_key);
            }),
            ReadyForQuery(status) => framed(out, b'Z', |o| o.put_u8(*status)),
            RowDescription(fields) => framed(out, b'T', |o| {
                o.put_i16(fields.len() as i16);
                for f in fields {
                    put_cstr(o, &f.name);
                    o.put_i32(0); // table oid
                    o.put_i16(0); // column attribute number
                    o.put_u32(f.type_oid);
                    o.put_i16(f.type_size);
                    o.put_i32(-1); // type modifier
                    o.put_i16(0); // text format
                }
            }),
            DataRow(cols) => framed(out, b'D', |o| {
                o.put_i16(cols.len() as i16);
                for c in cols {
                    match c {
                        Some(v) => {
                            o.put_i32(v.len() as i32);
                            o.put_slice(v.as_bytes());
                        }
                        None => o.put_i32(-1),
                    }
                }
            }),
            CommandComplete(tag) => framed(out, b'C', |o| put_cstr(o, tag)),
            EmptyQueryResponse => framed(out, b'I', |_| {}),
            ErrorResponse(e) => framed(out, b'E', |o| put_fields(o, e)),
            NoticeResponse(e) => framed(out, b'N', |o| put_fields(o, e)),
            ParseComplete => framed(out, b'1', |_| {}),
            BindComplete => framed(out, b'2', |_| {}),
            CloseComplete => framed(out, b'3', |_| {}),
            NoData => framed(out, b'n', |_| {}),
            PortalSuspended => framed(out, b's', |_| {}),
            ParameterDescription(oids) => framed(out, b't', |o| {
                o.put_i16(oids.len() as i16);
                for oid in oids {
                    o.put_u32(*oid);
                }
            }),
        }
    }
}

/// Decodes one framed backend message (never [`BackendMessage::EncryptionRefused`],
/// which the caller reads as a bare byte).
pub fn decode_backend(buf: &mut BytesMut) -> Result<Option<BackendMessage>, ProtocolError> {
    if buf.len() < 5 {
        return Ok(None);
    }
    let tag = buf[0];
    let len = i32::from_be_bytes([buf[1], buf[2], buf[3], buf[4]]) as i64;
    if !(4..=MAX_MESSAGE_LEN as i64).contains(&len) {
        return Err(ProtocolError::BadLength(len));
    }
    let total = 1 + len as usize;
    if buf.len() < total {
        return Ok(None);
    }
    let mut b = buf.split_to(total);
    b.advance(5);
    let b = &mut b;
    use BackendMessage::*;
    let msg = match tag {
        b'R' => match get_i32(b, "Authentication")? {
            0 => AuthenticationOk,
            3 => AuthenticationCleartextPassword,
            other => AuthenticationOther(other),
        },
        b'S' => ParameterStatus {
            name: get_cstr(b, "ParameterStatus")?,
            value: get_cstr(b, "ParameterStatus")?,
        },
        b'K' => BackendKeyData {
            process_id: get_i32(b, "BackendKeyData")?,
            secret_key: get_i32(b, "BackendKeyData")?,
        },
        b'Z' => ReadyForQuery(get_u8(b, "ReadyForQuery")?),
        b'T' => {
            let n = get_i16(b, "RowDescription")?;
            let mut fields = Vec::new();
            for _ in 0..n.max(0) {
                let name = get_cstr(b, "RowDescription")?;
                get_i32(b, "RowDescription")?;
                get_i16(b, "RowDescription")?;
                let type_oid = get_i32(b, "RowDescription")? as u32;
                let type_size = get_i16(b, "RowDescription")?;
                get_i32(b, "RowDescription")?;
                get_i16(b, "RowDescription")?;
                fields.push(FieldDescription {
                    name,
                    type_oid,
                    type_size,
                });
            }
            RowDescription(fields)
        }
        b'D' => {
            let n = get_i16(b, "DataRow")?;
            let mut cols = Vec::new();
            for _ in 0..n.max(0) {
                let len = get_i32(b, "DataRow")?;
                if len < 0 {
                    cols.push(None);
                } else {
                    let len = len as usize;
                    if b.len() < len {
                        return Err(ProtocolError::Malformed("DataRow"));
                    }
                    let v = String::from_utf8_lossy(&b.split_to(len)).into_owned();
                    cols.push(Some(v));
                }
            }
            DataRow(cols)
        }
        b'C' => CommandComplete(get_cstr(b, "CommandComplete")?),
        b'I' => EmptyQueryResponse,
        b'E' | b'N' => {
            let mut fields = ErrorFields {
                severity: String::new(),
                code: String::new(),
                message: String::new(),
            };
            loop {
                let code = get_u8(b, "ErrorResponse")?;
                if code == 0 {
                    break;
                }
                let value = get_cstr(b, "ErrorResponse")?;
                match code {
                    b'S' => fields.severity = value,
                    b'C' => fields.code = value,
                    b'M' => fields.message = value,
                    _ => {}
                }
            }
            if tag == b'E' {
                ErrorResponse(fields)
            } else {
                NoticeResponse(fields)
            }
        }
        b'1' => ParseComplete,
        b'2' => BindComplete,
        b'3' => CloseComplete,
        b'n' => NoData,
        b's' => PortalSuspended,
        b't' => {
            let n = get_i16(b, "ParameterDescription")?;
            let mut oids = Vec::new();
            for _ in 0..n.max(0) {
                oids.push(get_i32(b, "ParameterDescription")? as u32);
            }
            ParameterDescription(oids)
        }
        _ => return Err(ProtocolError::Malformed("backend")),
    };
    Ok(Some(msg))
}

/// Client-side encoders, used by the upstream mirror client and tests.
pub mod frontend {
    use super::*;

    pub fn startup(out: &mut BytesMut, params: &[(&str, &str)]) {
        let at = out.len();
        out.put_i32(0);
        out.put_i32(PROTOCOL_VERSION_3);
        for (k, v) in params {
            put_cstr(out, k);
            put_cstr(out, v);
        }
        out.put_u8(0);
        let len = (out.len() - at) as i32;
        out[at..at + 4].copy_from_slice(&len.to_be_bytes());
    }

    pub fn ssl_request(out: &mut BytesMut) {
        out.put_i32(8);
        out.put_i32(SSL_REQUEST_CODE);
    }

    pub fn cancel_request(out: &mut BytesMut, process_id: i32, secret_key: i32) {
        out.put_i32(16);
        out.put_i32(CANCEL_REQUEST_CODE);
        out.put_i32(process_id);
        out.put_i32(secret_key);
    }

    pub fn password(out: &mut BytesMut, password: &str) {
        framed(out, b'p', |o| put_cstr(o, password));
    }

    pub fn query(out: &mut BytesMut, sql: &str) {
        framed(out, b'Q', |o| put_cstr(o, sql));
    }

    pub fn parse(out: &mut BytesMut, name: &str, sql: &str) {
        framed(out, b'P', |o| {
            put_cstr(o, name);
            put_cstr(o, sql);
            o.put_i16(0);
        });
    }

    pub fn bind(out: &mut BytesMut, portal: &str, statement: &str, result_formats: &[i16]) {
        framed(out, b'B', |o| {
            put_cstr(o, portal);
            put_cstr(o, statement);
            o.put_i16(0);
            o.put_i16(0);
            o.put_i16(result_formats.len() as i16);
            for f in result_formats {
                o.put_i16(*f);
            }
        });
    }

    pub fn describe(out: &mut BytesMut, kind: u8, name: &str) {
        framed(out, b'D', |o| {
            o.put_u8(kind);
            put_cstr(o, name);
        });
    }

    pub fn execute(out: &mut BytesMut, portal: &str, max_rows: i32) {
        framed(out, b'E', |o| {
            put_cstr(o, portal);
            o.put_i32(max_rows);
        });
    }

    pub fn close(out: &mut BytesMut, kind: u8, name: &str) {
        framed(out, b'C', |o| {
            o.put_u8(kind);
            put_cstr(o, name);
        });
    }

    pub fn sync(out: &mut BytesMut) {
        framed(out, b'S', |_| {});
    }

    pub fn flush(out: &mut BytesMut) {
        framed(out, b'H', |_| {});
    }

    pub fn terminate(out: &mut BytesMut) {
        framed(out, b'X', |_| {});
    }
}
