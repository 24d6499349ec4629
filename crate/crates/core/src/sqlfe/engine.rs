use super::ast::{Expr, Projection, Select, Statement, Utility};
use super::lexer::CmpOp;
use super::parser::parse_script;
use super::{Cell, Column, ExecStats, Outcome, RowSet, SqlError, SqlType, StatementResult};
use crate::geometry::{parse_wkt, serialize_wkt, Geometry};
use crate::kernels::{run_batch, BatchOp, ExecutorConfig, KernelResult, KernelValue, KernelWarning};
use crate::store::{GeometryTable, Store};
use std::cmp::Ordering;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::Arc;

/// Text returned by `SELECT version()`.
pub const VERSION_STRING: &str = concat!("PostgreSQL 10.4 (spatial3d ", env!("CARGO_PKG_VERSION"), ")");

/// Executes SQL against a [`Store`] with a fixed executor configuration.
#[derive(Debug)]
pub struct Engine {
    store: Arc<Store>,
    cfg: ExecutorConfig,
    batches_run: AtomicU64,
    kernel_records_evaluated: AtomicU64,
    statements_executed: AtomicU64,
}

/// Cumulative counters since the engine was created.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineCounters {
    pub statements_executed: u64,
    pub batches_run: u64,
    pub kernel_records_evaluated: u64,
}

/// A parsed statement held by the extended query protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedStatement {
    statement: Option<Statement>,
}

impl PreparedStatement {
    pub fn is_empty(&self) -> bool {
        self.statement.is_none()
    }
}

impl Engine {
    pub fn new(store: Arc<Store>, cfg: ExecutorConfig) -> Self {
        Engine {
            store,
            cfg,
            batches_run: AtomicU64::new(0),
            kernel_records_evaluated: AtomicU64::new(0),
            statements_executed: AtomicU64::new(0),
        }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn config(&self) -> &ExecutorConfig {
        &self.cfg
    }

    pub fn counters(&self) -> EngineCounters {
        EngineCounters {
            statements_executed: self.statements_executed.load(AtomicOrdering::Relaxed),
            batches_run: self.batches_run.load(AtomicOrdering::Relaxed),
            kernel_records_evaluated: self.kernel_records_evaluated.load(AtomicOrdering::Relaxed),
        }
    }

    /// Runs every statement of a `;`-separated script in order, stopping at
    /// the first error (which is then the last element). A parse error anywhere
    /// in the script means nothing runs. An empty script yields one
    /// [`Outcome::Empty`].
    pub fn execute_script(&self, sql: &str) -> Vec<Result<StatementResult, SqlError>> {
        let stmts = match parse_script(sql) {
            Ok(s) => s,
            Err(e) => return vec![Err(e)],
        };
        if stmts.is_empty() {
            return vec![Ok(StatementResult {
                outcome: Outcome::Empty,
                notices: Vec::new(),
            })];
        }
        let mut out = Vec::with_capacity(stmts.len());
        for stmt in &stmts {
            let r = self.execute_statement(stmt);
            let failed = r.is_err();
            out.push(r);
            if failed {
                break;
            }
        }
        out
    }

    /// Runs a single statement.
    pub fn execute(&self, sql: &str) -> Result<StatementResult, SqlError> {
        let prepared = self.prepare(sql)?;
        self.execute_prepared(&prepared)
    }

    /// Runs a single `SELECT` and returns its rows.
    pub fn query(&self, sql: &str) -> Result<RowSet, SqlError> {
        match self.execute(sql)?.outcome {
            Outcome::Rows(r) => Ok(r),
            _ => Err(SqlError::unsupported("non-SELECT statement in query()")),
        }
    }

    pub fn prepare(&self, sql: &str) -> Result<PreparedStatement, SqlError> {
        let mut stmts = parse_script(sql)?;
        if stmts.len() > 1 {
            return Err(SqlError::syntax(
                1,
                "cannot insert multiple commands into a prepared statement",
            ));
        }
        Ok(PreparedStatement { statement: stmts.pop() })
    }

    /// Result columns, or `None` for statements that return no rows.
    pub fn describe(&self, prepared: &PreparedStatement) -> Result<Option<Vec<Column>>, SqlError> {
        match &prepared.statement {
            Some(Statement::Select(sel)) => Ok(Some(self.plan(sel)?.columns())),
            _ => Ok(None),
        }
    }

    pub fn execute_prepared(&self, prepared: &PreparedStatement) -> Result<StatementResult, SqlError> {
        match &prepared.statement {
            Some(stmt) => self.execute_statement(stmt),
            None => Ok(StatementResult {
                outcome: Outcome::Empty,
                notices: Vec::new(),
            }),
        }
    }

    fn execute_statement(&self, stmt: &Statement) -> Result<StatementResult, SqlError> {
        self.statements_executed.fetch_add(1, AtomicOrdering::Relaxed);
        match stmt {
            Statement::Utility(u) => {
                let notices = match u {
                    Utility::Set => Vec::new(),
                    other => vec![format!(
                        "transactions are not supported; {} has no effect",
                        other.command_tag()
                    )],
                };
                Ok(StatementResult {
                    outcome: Outcome::Command(u.command_tag().to_string()),
                    notices,
                })
            }
            Statement::Select(sel) => {
                let plan = self.plan(sel)?;
                self.run(plan)
            }
        }
    }

    fn plan(&self, sel: &Select) -> Result<Plan, SqlError> {
        let table = match &sel.from {
            Some(t) => Some(self.store.table(&t.name)?),
            None => None,
        };
        let mut p = Planner {
            table: table.as_deref(),
            calls: Vec::new(),
            aliases: Vec::new(),
        };

        let mut projections = Vec::new();
        for proj in &sel.projections {
            match proj {
                Projection::Wildcard => {
                    let Some(t) = &table else {
                        return Err(SqlError::syntax(1, "SELECT * with no tables specified is not valid"));
                    };
                    projections.push((column("id", SqlType::Int8), PExpr::Id));
                    projections.push((column(t.geom_column(), SqlType::Geometry), PExpr::Geom));
                }
                Projection::Expr { expr, alias } => {
                    let (pe, ty) = p.resolve(expr)?;
                    let name = alias.clone().unwrap_or_else(|| default_name(expr, table.as_deref()));
                    if let (Some(a), PExpr::Call(_)) = (alias, &pe) {
                        p.aliases.push((a.to_ascii_lowercase(), pe.clone(), ty));
                    }
                    projections.push((column(&name, ty), pe));
                }
            }
        }

        let filter = match &sel.where_clause {
            Some(w) => {
                let (pe, ty) = p.resolve(w)?;
                if ty != SqlType::Bool {
                    return Err(SqlError::TypeMismatch(format!(
                        "argument of WHERE must be type boolean, not type {}",
                        ty.pg_name()
                    )));
                }
                Some(pe)
            }
            None => None,
        };

        Ok(Plan {
            calls: p.calls,
            table,
            projections,
            filter,
            limit: sel.limit,
        })
    }

    fn run(&self, plan: Plan) -> Result<StatementResult, SqlError> {
        let mut stats = ExecStats::default();
        let mut notices = Vec::new();
        let snapshot = plan.table.as_ref().map(|t| t.records().clone());
        let row_count = snapshot.as_ref().map_or(1, |s| s.len());
        stats.table_rows = snapshot.as_ref().map_or(0, |s| s.len() as u64);

        // Every distinct call runs over the whole snapshot, whatever the
        // filter or limit turn out to select.
        let mut results: Vec<Vec<KernelResult>> = Vec::with_capacity(plan.calls.len());
        if let Some(snap) = &snapshot {
            for call in &plan.calls {
                let out = run_batch(call.op, snap, call.argument.as_ref(), &self.cfg).map_err(SqlError::Kernel)?;
                stats.batches_run += 1;
                stats.kernel_records_evaluated += snap.len() as u64;
                results.push(out);
            }
        }
        self.batches_run.fetch_add(stats.batches_run, AtomicOrdering::Relaxed);
        self.kernel_records_evaluated
            .fetch_add(stats.kernel_records_evaluated, AtomicOrdering::Relaxed);

        let mut first_error = None;
        let mut open_meshes = 0u64;
        let excluded: Vec<bool> = (0..row_count)
            .map(|r| {
                let mut bad = false;
                for (ci, res) in results.iter().enumerate() {
                    match &res[r].value {
                        KernelValue::Error(e) => {
                            bad = true;
                            first_error.get_or_insert_with(|| (plan.calls[ci].op, e.clone()));
                        }
                        _ if res[r].warning == Some(KernelWarning::OpenMesh) => open_meshes += 1,
                        _ => {}
                    }
                }
                bad
            })
            .collect();
        stats.excluded_rows = excluded.iter().filter(|&&b| b).count() as u64;
        if let Some((op, e)) = first_error {
            notices.push(format!(
                "{} rows excluded because a spatial function failed for them (first: {}: {e})",
                stats.excluded_rows,
                op.sql_name()
            ));
        }
        if open_meshes > 0 {
            notices.push(format!(
                "{open_meshes} volume values come from meshes that are not closed"
            ));
        }

        let ctx = EvalCtx {
            records: snapshot.as_deref(),
            results: &results,
        };
        let limit = plan.limit.map_or(usize::MAX, |l| l.min(usize::MAX as u64) as usize);
        let mut rows = Vec::new();
        for (r, &skip) in excluded.iter().enumerate() {
            if rows.len() >= limit {
                break;
            }
            if skip {
                continue;
            }
            if let Some(f) = &plan.filter {
                if !matches!(ctx.eval(f, r), Value::Bool(true)) {
                    continue;
                }
            }
            rows.push(
                plan.projections
                    .iter()
                    .map(|(_, e)| ctx.eval(e, r).into_cell())
                    .collect(),
            );
        }

        Ok(StatementResult {
            outcome: Outcome::Rows(RowSet {
                columns: plan.columns(),
                rows,
                stats,
            }),
            notices,
        })
    }
}

fn column(name: &str, sql_type: SqlType) -> Column {
    Column {
        name: name.to_string(),
        sql_type,
    }
}

fn default_name(expr: &Expr, table: Option<&GeometryTable>) -> String {
    match expr {
        Expr::Column { name, .. } => {
            let bare = name.rsplit('.').next().unwrap_or(name);
            match table {
                Some(t) if bare.eq_ignore_ascii_case(t.geom_column()) => t.geom_column().to_string(),
                _ => bare.to_string(),
            }
        }
        Expr::Call { name, .. } => name.clone(),
        Expr::Bool(_) => "bool".into(),
        _ => "?column?".into(),
    }
}

#[derive(Debug, Clone)]
struct PlannedCall {
    op: BatchOp,
    argument: Option<Geometry>,
}

#[derive(Debug, Clone, PartialEq)]
enum PExpr {
    Id,
    Geom,
    Call(usize),
    Int(i64),
    Real(f64),
    Bool(bool),
    Text(String),
    GeomLiteral(Arc<Geometry>),
    Neg(Box<PExpr>),
    Not(Box<PExpr>),
    And(Box<PExpr>, Box<PExpr>),
    Or(Box<PExpr>, Box<PExpr>),
    Compare(CmpOp, Box<PExpr>, Box<PExpr>),
}

struct Plan {
    calls: Vec<PlannedCall>,
    table: Option<Arc<GeometryTable>>,
    projections: Vec<(Column, PExpr)>,
    filter: Option<PExpr>,
    limit: Option<u64>,
}

impl Plan {
    fn columns(&self) -> Vec<Column> {
        self.projections.iter().map(|(c, _)| c.clone()).collect()
    }
}

struct Planner<'a> {
    table: Option<&'a GeometryTable>,
    calls: Vec<PlannedCall>,
    aliases: Vec<(String, PExpr, SqlType)>,
}

enum ArgKind {
    GeomColumn,
    Literal(Geometry),
}

impl Planner<'_> {
    fn resolve(&mut self, e: &Expr) -> Result<(PExpr, SqlType), SqlError> {
        Ok(match e {
            Expr::Integer(v) => {
                let ty = if i32::try_from(*v).is_ok() {
                    SqlType::Int4
                } else {
                    SqlType::Int8
                };
                (PExpr::Int(*v), ty)
            }
            Expr::Number(v) => (PExpr::Real(*v), SqlType::Float8),
            Expr::Bool(b) => (PExpr::Bool(*b), SqlType::Bool),
            Expr::Str(s) => (PExpr::Text(s.clone()), SqlType::Text),
            Expr::Column { name, .. } => self.resolve_column(name)?,
            Expr::Call { name, args, pos } => self.resolve_call(name, args, *pos)?,
            Expr::Neg(inner, _) => {
                let (pe, ty) = self.resolve(inner)?;
                if !ty.is_numeric() {
                    return Err(SqlError::TypeMismatch(format!(
                        "operator does not exist: - {}",
                        ty.pg_name()
                    )));
                }
                (PExpr::Neg(Box::new(pe)), ty)
            }
            Expr::Not(inner) => {
                let pe = self.boolean(inner, "NOT")?;
                (PExpr::Not(Box::new(pe)), SqlType::Bool)
            }
            Expr::And(a, b) => {
                let (a, b) = (self.boolean(a, "AND")?, self.boolean(b, "AND")?);
                (PExpr::And(Box::new(a), Box::new(b)), SqlType::Bool)
            }
            Expr::Or(a, b) => {
                let (a, b) = (self.boolean(a, "OR")?, self.boolean(b, "OR")?);
                (PExpr::Or(Box::new(a), Box::new(b)), SqlType::Bool)
            }
            Expr::Compare { op, left, right, .. } => {
                let (l, lt) = self.resolve(left)?;
                let (r, rt) = self.resolve(right)?;
                let comparable =
                    (lt.is_numeric() && rt.is_numeric()) || (lt == rt && matches!(lt, SqlType::Bool | SqlType::Text));
                if !comparable {
                    return Err(SqlError::TypeMismatch(format!(
                        "operator does not exist: {} {} {}",
                        lt.pg_name(),
                        op.symbol(),
                        rt.pg_name()
                    )));
                }
                (PExpr::Compare(*op, Box::new(l), Box::new(r)), SqlType::Bool)
            }
        })
    }

    fn boolean(&mut self, e: &Expr, what: &str) -> Result<PExpr, SqlError> {
        let (pe, ty) = self.resolve(e)?;
        if ty != SqlType::Bool {
            return Err(SqlError::TypeMismatch(format!(
                "argument of {what} must be type boolean, not type {}",
                ty.pg_name()
            )));
        }
        Ok(pe)
    }

    fn resolve_column(&self, name: &str) -> Result<(PExpr, SqlType), SqlError> {
        let lower = name.to_ascii_lowercase();
        let (qualifier, bare) = match lower.split_once('.') {
            Some((q, b)) => (Some(q), b),
            None => (None, lower.as_str()),
        };
        let Some(table) = self.table else {
            return Err(SqlError::UnknownColumn(name.to_string()));
        };
        if let Some(q) = qualifier {
            if q != table.name() {
                return Err(SqlError::UnknownTable(q.to_string()));
            }
        }
        if bare == "id" {
            return Ok((PExpr::Id, SqlType::Int8));
        }
        if bare == table.geom_column() {
            return Ok((PExpr::Geom, SqlType::Geometry));
        }
        if qualifier.is_none() {
            if let Some((_, pe, ty)) = self.aliases.iter().find(|(a, _, _)| a == bare) {
                return Ok((pe.clone(), *ty));
            }
        }
        Err(SqlError::UnknownColumn(name.to_string()))
    }

    fn resolve_call(&mut self, name: &str, args: &[Expr], pos: usize) -> Result<(PExpr, SqlType), SqlError> {
        let unknown = |planner: &Self| SqlError::UnknownFunction {
            signature: planner.signature(name, args),
            position: pos,
        };
        match (name, args.len()) {
            ("version", 0) => Ok((PExpr::Text(super::engine::VERSION_STRING.to_string()), SqlType::Text)),
            ("st_geomfromtext", 1 | 2) => {
                let g = self.geometry_literal(name, args, pos)?;
                Ok((PExpr::GeomLiteral(Arc::new(g)), SqlType::Geometry))
            }
            ("st_volume", 1) => {
                let kind = self.spatial_arg(&args[0])?;
                match kind {
                    ArgKind::GeomColumn => Ok(self.add_call(BatchOp::Volume, None)),
                    ArgKind::Literal(_) => Err(SqlError::unsupported(
                        "spatial functions without a table geometry argument",
                    )),
                }
            }
            ("st_3ddistance" | "st_3dintersects", 2) => {
                let op = if name == "st_3ddistance" {
                    BatchOp::Distance
                } else {
                    BatchOp::Intersects
                };
                match (self.spatial_arg(&args[0])?, self.spatial_arg(&args[1])?) {
                    (ArgKind::GeomColumn, ArgKind::Literal(g)) | (ArgKind::Literal(g), ArgKind::GeomColumn) => {
                        Ok(self.add_call(op, Some(g)))
                    }
                    (ArgKind::GeomColumn, ArgKind::GeomColumn) => {
                        Err(SqlError::unsupported("spatial functions over two table geometries"))
                    }
                    (ArgKind::Literal(_), ArgKind::Literal(_)) => Err(SqlError::unsupported(
                        "spatial functions without a table geometry argument",
                    )),
                }
            }
            _ => Err(unknown(self)),
        }
    }

    fn signature(&self, name: &str, args: &[Expr]) -> String {
        let types: Vec<&str> = args
            .iter()
            .map(|a| match a {
                Expr::Integer(_) => "integer",
                Expr::Number(_) => "numeric",
                Expr::Str(_) => "unknown",
                Expr::Bool(_) => "boolean",
                Expr::Call { name, .. } if name == "st_geomfromtext" => "geometry",
                Expr::Column { name, .. } => match self.table {
                    Some(_) if name.eq_ignore_ascii_case("id") => "bigint",
                    Some(t) if name.eq_ignore_ascii_case(t.geom_column()) => "geometry",
                    _ => "unknown",
                },
                _ => "unknown",
            })
            .collect();
        format!("{name}({})", types.join(", "))
    }

    /// A spatial function argument: the table's geometry column, or a geometry
    /// literal (`ST_GeomFromText('...')` or a bare WKT string).
    fn spatial_arg(&mut self, e: &Expr) -> Result<ArgKind, SqlError> {
        match e {
            Expr::Call { name, args, pos } if name == "st_geomfromtext" => {
                Ok(ArgKind::Literal(self.geometry_literal(name, args, *pos)?))
            }
            Expr::Str(s) => Ok(ArgKind::Literal(parse_wkt(s).map_err(SqlError::InvalidGeometry)?)),
            _ => match self.resolve(e)? {
                (PExpr::Geom, _) => Ok(ArgKind::GeomColumn),
                (_, ty) => Err(SqlError::TypeMismatch(format!(
                    "spatial functions take geometry arguments, not {}",
                    ty.pg_name()
                ))),
            },
        }
    }

    fn geometry_literal(&self, name: &str, args: &[Expr], pos: usize) -> Result<Geometry, SqlError> {
        match args {
            [Expr::Str(s)] | [Expr::Str(s), Expr::Integer(_)] => parse_wkt(s).map_err(SqlError::InvalidGeometry),
            [_] | [_, _] => Err(SqlError::unsupported("ST_GeomFromText over non-literal text")),
            _ => Err(SqlError::UnknownFunction {
                signature: self.signature(name, args),
                position: pos,
            }),
        }
    }

    fn add_call(&mut self, op: BatchOp, argument: Option<Geometry>) -> (PExpr, SqlType) {
        let ty = match op {
            BatchOp::Intersects => SqlType::Bool,
            BatchOp::Volume | BatchOp::Distance => SqlType::Float8,
        };
        let idx = match self.calls.iter().position(|c| c.op == op && c.argument == argument) {
            Some(i) => i,
            None => {
                self.calls.push(PlannedCall { op, argument });
                self.calls.len() - 1
            }
        };
        (PExpr::Call(idx), ty)
    }
}

enum Value<'a> {
    Int(i64),
    Real(f64),
    Bool(bool),
    Text(&'a str),
    Geom(&'a Geometry),
}

impl Value<'_> {
    fn into_cell(self) -> Cell {
        match self {
            Value::Int(v) => Cell::Int(v),
            Value::Real(v) => Cell::Real(v),
            Value::Bool(b) => Cell::Bool(b),
            Value::Text(s) => Cell::Text(s.to_string()),
            Value::Geom(g) => Cell::Text(serialize_wkt(g)),
        }
    }

    fn as_f64(&self) -> f64 {
        match self {
            Value::Int(v) => *v as f64,
            Value::Real(v) => *v,
            _ => unreachable!("type-checked numeric operand"),
        }
    }
}

struct EvalCtx<'a> {
    records: Option<&'a [crate::store::GeometryRecord]>,
    results: &'a [Vec<KernelResult>],
}

impl<'a> EvalCtx<'a> {
    fn eval(&self, e: &'a PExpr, row: usize) -> Value<'a> {
        match e {
            PExpr::Id => Value::Int(self.records.expect("planned with a table")[row].id),
            PExpr::Geom => Value::Geom(&self.records.expect("planned with a table")[row].geometry),
            PExpr::Call(i) => match &self.results[*i][row].value {
                KernelValue::Real(v) => Value::Real(*v),
                KernelValue::Bool(b) => Value::Bool(*b),
                KernelValue::Error(_) => unreachable!("error rows are excluded before evaluation"),
            },
            PExpr::Int(v) => Value::Int(*v),
            PExpr::Real(v) => Value::Real(*v),
            PExpr::Bool(b) => Value::Bool(*b),
            PExpr::Text(s) => Value::Text(s),
            PExpr::GeomLiteral(g) => Value::Geom(g),
            PExpr::Neg(inner) => match self.eval(inner, row) {
                Value::Int(v) => Value::Int(v.wrapping_neg()),
                other => Value::Real(-other.as_f64()),
            },
            PExpr::Not(inner) => Value::Bool(!self.truth(inner, row)),
            PExpr::And(a, b) => Value::Bool(self.truth(a, row) && self.truth(b, row)),
            PExpr::Or(a, b) => Value::Bool(self.truth(a, row) || self.truth(b, row)),
            PExpr::Compare(op, l, r) => {
                let ord = match (self.eval(l, row), self.eval(r, row)) {
                    (Value::Int(a), Value::Int(b)) => a.cmp(&b),
                    (Value::Bool(a), Value::Bool(b)) => a.cmp(&b),
                    (Value::Text(a), Value::Text(b)) => a.cmp(b),
                    (a, b) => float_cmp(a.as_f64(), b.as_f64()),
                };
                Value::Bool(match op {
                    CmpOp::Lt => ord == Ordering::Less,
                    CmpOp::Le => ord != Ordering::Greater,
                    CmpOp::Gt => ord == Ordering::Greater,
                    CmpOp::Ge => ord != Ordering::Less,
                    CmpOp::Eq => ord == Ordering::Equal,
                    CmpOp::Ne => ord != Ordering::Equal,
                })
            }
        }
    }

    fn truth(&self, e: &'a PExpr, row: usize) -> bool {
        matches!(self.eval(e, row), Value::Bool(true))
    }
}

/// PostgreSQL float ordering: NaN equals NaN and sorts above everything else.
fn float_cmp(a: f64, b: f64) -> Ordering {
    match (a.is_nan(), b.is_nan()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        _ => a.partial_cmp(&b).expect("non-NaN"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes::{cuboid, unit_cube};
    use crate::geometry::Point3;
    use crate::store::GeometryRecord;

    fn engine_with(records: Vec<GeometryRecord>, table: &str, cfg: ExecutorConfig) -> Engine {
        let store = Arc::new(Store::new());
        store.register(table, records, "geom").unwrap();
        Engine::new(store, cfg)
    }

    fn cubes() -> Vec<GeometryRecord> {
        (1..=3)
            .map(|i| GeometryRecord {
                id: i,
                geometry: Geometry::mesh(unit_cube()),
            })
            .collect()
    }

    #[test]
    fn volume_over_three_cubes() {
        let e = engine_with(cubes(), "ores", ExecutorConfig::sequential());
        let rs = e.query("SELECT id, ST_Volume(geom) FROM ores").unwrap();
        assert_eq!(rs.columns[0], column("id", SqlType::Int8));
        assert_eq!(rs.columns[1], column("st_volume", SqlType::Float8));
        assert_eq!(rs.text_rows(), vec![vec!["1", "1"], vec!["2", "1"], vec!["3", "1"]]);
        assert_eq!(rs.command_tag(), "SELECT 3");
    }

    #[test]
    fn select_one_and_version() {
        let e = Engine::new(Arc::new(Store::new()), ExecutorConfig::sequential());
        let rs = e.query("SELECT 1").unwrap();
        assert_eq!(rs.columns, vec![column("?column?", SqlType::Int4)]);
        assert_eq!(rs.text_rows(), vec![vec!["1"]]);
        let rs = e.query("select VERSION()").unwrap();
        assert_eq!(rs.columns[0].name, "version");
        assert!(rs.text_rows()[0][0].starts_with("PostgreSQL"));
    }

    #[test]
    fn limit_does_not_shrink_the_batch() {
        let recs: Vec<_> = (0..50)
            .map(|i| GeometryRecord {
                id: i,
                geometry: Geometry::Point(Point3::new(i as f64, 0.0, 5.0)),
            })
            .collect();
        let store = Arc::new(Store::new());
        store.register("pts", recs, "geom").unwrap();
        store
            .register(
                "box",
                vec![GeometryRecord {
                    id: 1,
                    geometry: Geometry::mesh(unit_cube()),
                }],
                "geom",
            )
            .unwrap();
        let e = Engine::new(store, ExecutorConfig::sequential());
        let sql = "SELECT id FROM pts WHERE ST_3DDistance(geom, ST_GeomFromText('POINT Z (0 0 0)')) < 10 LIMIT 1";
        let rs = e.query(sql).unwrap();
        assert_eq!(rs.text_rows(), vec![vec!["0"]]);
        assert_eq!(rs.stats.kernel_records_evaluated, 50);
        assert_eq!(rs.stats.excluded_rows, 0);

        let sql = "SELECT id, ST_3DDistance(geom, 'TIN Z (((0 0 0, 1 0 0, 0 1 0, 0 0 0)))') AS d FROM pts \
                   WHERE d < 10 AND ST_3DDistance(ST_GeomFromText('TIN Z (((0 0 0, 1 0 0, 0 1 0, 0 0 0)))'), geom) >= 0 LIMIT 2";
        let rs = e.query(sql).unwrap();
        assert_eq!(rs.rows.len(), 2);
        assert_eq!(rs.stats.batches_run, 1);
        assert_eq!(rs.stats.kernel_records_evaluated, 50);
        assert_eq!(rs.text_rows(), vec![vec!["0", "5"], vec!["1", "5"]]);
    }

    #[test]
    fn type_mismatch_rows_are_excluded_with_notice() {
        let mut recs = cubes();
        recs.push(GeometryRecord {
            id: 9,
            geometry: Geometry::Point(Point3::ORIGIN),
        });
        let e = engine_with(recs, "ores", ExecutorConfig::sequential());
        let res = e.execute("SELECT id FROM ores WHERE ST_Volume(geom) > 0.5").unwrap();
        let Outcome::Rows(rs) = res.outcome else { panic!() };
        assert_eq!(rs.rows.len(), 3);
        assert_eq!(rs.stats.excluded_rows, 1);
        assert_eq!(res.notices.len(), 1);
        assert!(res.notices[0].starts_with("1 rows excluded"), "{}", res.notices[0]);
    }

    #[test]
    fn plan_errors() {
        let e = engine_with(cubes(), "ores", ExecutorConfig::sequential());
        let code = |sql: &str| e.execute(sql).unwrap_err().sqlstate();
        assert_eq!(code("SELECT id FROM nope"), "42P01");
        assert_eq!(code("SELECT foo(geom) FROM ores"), "42883");
        assert_eq!(code("SELECT ST_Volume(geom, geom) FROM ores"), "42883");
        assert_eq!(
            code("SELECT id FROM ores WHERE ST_3DIntersects(geom, 'POINT Z (0 0 0)') < 1"),
            "42804"
        );
        assert_eq!(code("SELECT id FROM ores WHERE ST_Volume(geom)"), "42804");
        assert_eq!(code("SELECT id FROM ores WHERE NOT id"), "42804");
        assert_eq!(code("SELECT name FROM ores"), "42703");
        assert_eq!(
            code("SELECT ST_Volume(geom) FROM ores WHERE ST_Volume(ST_GeomFromText('POINT Z (0 0)')) > 0"),
            "22P02"
        );
        assert_eq!(code("SELECT ST_3DDistance(geom, geom) FROM ores"), "0A000");
        assert_eq!(code("SELECT id FROM ores; SELECT"), "42601");
    }

    #[test]
    fn wildcard_and_geometry_text() {
        let recs = vec![GeometryRecord {
            id: 4,
            geometry: Geometry::Point(Point3::new(1.5, -2.0, 0.25)),
        }];
        let e = engine_with(recs, "pts", ExecutorConfig::sequential());
        let rs = e.query("SELECT * FROM pts").unwrap();
        assert_eq!(rs.columns[1], column("geom", SqlType::Geometry));
        assert_eq!(
            rs.text_rows(),
            vec![vec!["4".to_string(), "POINT Z (1.5 -2 0.25)".to_string()]]
        );
    }

    #[test]
    fn dedup_counts_one_batch() {
        let e = engine_with(cubes(), "ores", ExecutorConfig::sequential());
        let rs = e
            .query("SELECT ST_Volume(geom), ST_Volume(GEOM) v FROM ores WHERE ST_Volume(geom) = 1 AND v >= 1")
            .unwrap();
        assert_eq!(rs.stats.batches_run, 1);
        assert_eq!(rs.rows.len(), 3);
        assert_eq!(e.counters().batches_run, 1);
    }

    #[test]
    fn scripts_stop_at_first_error() {
        let e = engine_with(cubes(), "ores", ExecutorConfig::sequential());
        let out = e.execute_script("BEGIN; SELECT id FROM ores LIMIT 1; SELECT id FROM nope; SELECT 1");
        assert_eq!(out.len(), 3);
        assert!(matches!(&out[0], Ok(r) if r.outcome == Outcome::Command("BEGIN".into()) && r.notices.len() == 1));
        assert!(out[1].is_ok());
        assert!(out[2].is_err());
        let out = e.execute_script(" ; ");
        assert!(matches!(
            &out[..],
            [Ok(StatementResult {
                outcome: Outcome::Empty,
                ..
            })]
        ));
    }

    #[test]
    fn backends_agree() {
        let recs: Vec<_> = (0..40)
            .map(|i| {
                let o = i as f64 * 0.3;
                GeometryRecord {
                    id: 100 - i,
                    geometry: Geometry::mesh(cuboid(Point3::new(o, 0.0, 0.0), Point3::new(o + 1.0, 2.0, 0.5))),
                }
            })
            .collect();
        let sql = "SELECT id, ST_3DDistance(geom, 'LINESTRING Z (0 0 3, 5 1 3)'), ST_Volume(geom) FROM t \
                   WHERE ST_3DIntersects(geom, 'LINESTRING Z (2 1 -1, 2 1 1)') OR id > 90";
        let base = engine_with(recs.clone(), "t", ExecutorConfig::sequential())
            .query(sql)
            .unwrap();
        for w in 2..=8 {
            let par = engine_with(recs.clone(), "t", ExecutorConfig::parallel(w).with_chunk_size(3))
                .query(sql)
                .unwrap();
            assert_eq!(par.rows, base.rows, "workers {w}");
        }
    }
}
