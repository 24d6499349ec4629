use super::lexer::CmpOp;

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Select(Select),
    /// Accepted for client compatibility and otherwise ignored.
    Utility(Utility),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Utility {
    Begin,
    Commit,
    Rollback,
    Set,
}

impl Utility {
    pub fn command_tag(self) -> &'static str {
        match self {
            Utility::Begin => "BEGIN",
            Utility::Commit => "COMMIT",
            Utility::Rollback => "ROLLBACK",
            Utility::Set => "SET",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Select {
    pub projections: Vec<Projection>,
    pub from: Option<TableRef>,
    pub where_clause: Option<Expr>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRef {
    pub name: String,
    pub pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    /// `*`: the id and geometry columns.
    Wildcard,
    Expr {
        expr: Expr,
        alias: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Column {
        name: String,
        pos: usize,
    },
    Integer(i64),
    Number(f64),
    Str(String),
    Bool(bool),
    Call {
        name: String,
        args: Vec<Expr>,
        pos: usize,
    },
    Neg(Box<Expr>, usize),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Compare {
        op: CmpOp,
        left: Box<Expr>,
        right: Box<Expr>,
        pos: usize,
    },
}
