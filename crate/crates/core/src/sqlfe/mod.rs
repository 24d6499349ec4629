//! SQL subset front end.
//!
//! A statement is split into spatial calls, which run as full-table kernel
//! batches, and a residual predicate evaluated per record over the kernel
//! output. The grammar is documented in `docs/sql-grammar.md`.

mod ast;
mod engine;
mod lexer;
mod parser;

pub use ast::{Expr, Projection, Select, Statement, TableRef, Utility};
pub use engine::{Engine, EngineCounters, PreparedStatement};
pub use lexer::CmpOp;
pub use parser::{parse_script, parse_sql};

use crate::geometry::GeometryError;
use crate::kernels::KernelError;
use crate::store::StoreError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SqlError {
    #[error("{message} (position {position})")]
    Syntax { position: usize, message: String },
    #[error("function {signature} does not exist")]
    UnknownFunction { signature: String, position: usize },
    #[error("{0} is not supported")]
    Unsupported(String),
    #[error("relation \"{0}\" does not exist")]
    UnknownTable(String),
    #[error("relation \"{0}\" is still loading")]
    TableNotReady(String),
    #[error("column \"{0}\" does not exist")]
    UnknownColumn(String),
    #[error("{0}")]
    TypeMismatch(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(GeometryError),
    #[error("{0}")]
    Kernel(KernelError),
    #[error("{0}")]
    Store(String),
}

impl SqlError {
    pub(crate) fn syntax(position: usize, message: impl Into<String>) -> Self {
        SqlError::Syntax {
            position,
            message: message.into(),
        }
    }

    pub(crate) fn unsupported(what: impl Into<String>) -> Self {
        SqlError::Unsupported(what.into())
    }

    /// PostgreSQL SQLSTATE for this error.
    pub fn sqlstate(&self) -> &'static str {
        match self {
            SqlError::Syntax { .. } => "42601",
            SqlError::UnknownFunction { .. } => "42883",
            SqlError::Unsupported(_) => "0A000",
            SqlError::UnknownTable(_) => "42P01",
            SqlError::TableNotReady(_) => "55000",
            SqlError::UnknownColumn(_) => "42703",
            SqlError::TypeMismatch(_) => "42804",
            SqlError::InvalidGeometry(_) => "22P02",
            SqlError::Kernel(_) => "XX000",
            SqlError::Store(_) => "XX000",
        }
    }
}

impl From<StoreError> for SqlError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownTable(t) => SqlError::UnknownTable(t),
            StoreError::TableNotReady(t) => SqlError::TableNotReady(t),
            other => SqlError::Store(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqlType {
    Int4,
    Int8,
    Float8,
    Bool,
    Text,
    /// Sent to clients as text (WKT).
    Geometry,
}

impl SqlType {
    pub fn oid(self) -> u32 {
        use crate::wire::protocol::oid;
        match self {
            SqlType::Int4 => oid::INT4,
            SqlType::Int8 => oid::INT8,
            SqlType::Float8 => oid::FLOAT8,
            SqlType::Bool => oid::BOOL,
            SqlType::Text | SqlType::Geometry => oid::TEXT,
        }
    }

    /// `pg_type.typlen`: fixed width in bytes, or -1 for variable length.
    pub fn type_size(self) -> i16 {
        match self {
            SqlType::Int4 => 4,
            SqlType::Int8 | SqlType::Float8 => 8,
            SqlType::Bool => 1,
            SqlType::Text | SqlType::Geometry => -1,
        }
    }

    pub fn pg_name(self) -> &'static str {
        match self {
            SqlType::Int4 => "integer",
            SqlType::Int8 => "bigint",
            SqlType::Float8 => "double precision",
            SqlType::Bool => "boolean",
            SqlType::Text => "text",
            SqlType::Geometry => "geometry",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, SqlType::Int4 | SqlType::Int8 | SqlType::Float8)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub sql_type: SqlType,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    /// PostgreSQL text output format.
    pub fn to_text(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format_float8(*v),
            Cell::Bool(b) => if *b { "t" } else { "f" }.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Shortest round-trip text for a double, in PostgreSQL's layout: plain
/// decimal for exponents in `[-4, 15)`, otherwise `d.ddde+XX`.
pub fn format_float8(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "Infinity" } else { "-Infinity" }.into();
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{v:e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..15).contains(&exp) {
        format!("{v}")
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

/// Per-statement execution counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExecStats {
    /// Records in the scanned table snapshot.
    pub table_rows: u64,
    /// Distinct spatial calls evaluated, one kernel batch each.
    pub batches_run: u64,
    /// Sum over batches of records handed to the kernels.
    pub kernel_records_evaluated: u64,
    /// Rows dropped because a referenced spatial call failed for them.
    pub excluded_rows: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowSet {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    pub stats: ExecStats,
}

impl RowSet {
    pub fn command_tag(&self) -> String {
        format!("SELECT {}", self.rows.len())
    }

    /// Rows rendered as PostgreSQL text values.
    pub fn text_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(Cell::to_text).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Rows(RowSet),
    /// Utility statement with its command tag.
    Command(String),
    /// The query text held no statement.
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatementResult {
    pub outcome: Outcome,
    pub notices: Vec<String>,
}
