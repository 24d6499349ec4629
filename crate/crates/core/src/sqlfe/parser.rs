use super::ast::{Expr, Projection, Select, Statement, TableRef, Utility};
use super::lexer::{tokenize, Tok, Token};
use super::SqlError;

/// Parses a `;`-separated script. Empty statements are dropped, so an
/// all-blank script yields an empty list.
pub fn parse_script(sql: &str) -> Result<Vec<Statement>, SqlError> {
    let tokens = tokenize(sql)?;
    let end_pos = sql.chars().count() + 1;
    let mut out = Vec::new();
    for piece in tokens.split(|t| t.tok == Tok::Semicolon) {
        if piece.is_empty() {
            continue;
        }
        let mut p = Parser {
            toks: piece,
            i: 0,
            end_pos: piece_end(piece, &tokens, end_pos),
        };
        out.push(p.statement()?);
    }
    Ok(out)
}

/// Parses exactly one statement (a trailing `;` is allowed).
pub fn parse_sql(sql: &str) -> Result<Statement, SqlError> {
    let mut stmts = parse_script(sql)?;
    match stmts.len() {
        0 => Err(SqlError::syntax(1, "empty query")),
        1 => Ok(stmts.remove(0)),
        _ => Err(SqlError::syntax(1, "expected a single statement")),
    }
}

fn piece_end(piece: &[Token], all: &[Token], end_pos: usize) -> usize {
    let last = piece.last().expect("non-empty");
    all.iter()
        .find(|t| t.pos > last.pos && t.tok == Tok::Semicolon)
        .map_or(end_pos, |t| t.pos)
}

const RESERVED: &[&str] = &[
    "select",
    "from",
    "where",
    "limit",
    "join",
    "inner",
    "left",
    "right",
    "full",
    "cross",
    "natural",
    "group",
    "order",
    "having",
    "offset",
    "union",
    "intersect",
    "except",
    "for",
    "window",
    "fetch",
    "on",
    "as",
    "and",
    "or",
    "not",
    "is",
    "in",
    "between",
    "like",
    "ilike",
    "distinct",
    "all",
    "into",
    "using",
    "returning",
];

const UNSUPPORTED_STATEMENTS: &[&str] = &[
    "insert",
    "update",
    "delete",
    "create",
    "drop",
    "alter",
    "copy",
    "with",
    "values",
    "table",
    "truncate",
    "grant",
    "revoke",
    "explain",
    "prepare",
    "execute",
    "declare",
    "fetch",
    "move",
    "close",
    "listen",
    "notify",
    "vacuum",
    "analyze",
    "lock",
    "show",
    "reset",
    "discard",
    "deallocate",
    "merge",
    "call",
    "do",
];

struct Parser<'a> {
    toks: &'a [Token],
    i: usize,
    end_pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.i).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&'a Tok> {
        self.toks.get(self.i + k).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.i).map_or(self.end_pos, |t| t.pos)
    }

    fn next(&mut self) -> Option<&'a Tok> {
        let t = self.toks.get(self.i).map(|t| &t.tok);
        self.i += 1;
        t
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(x)) if x == w)
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn error_here(&self, expected: &str) -> SqlError {
        let found = match self.peek() {
            None => "end of input".to_string(),
            Some(t) => format!("\"{}\"", describe(t)),
        };
        SqlError::syntax(
            self.pos(),
            format!("syntax error at or near {found}: expected {expected}"),
        )
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<(), SqlError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error_here(what))
        }
    }

    fn at_end(&self) -> bool {
        self.i >= self.toks.len()
    }

    fn statement(&mut self) -> Result<Statement, SqlError> {
        let Some(Tok::Word(first)) = self.peek() else {
            if self.peek() == Some(&Tok::LParen) {
                return Err(SqlError::unsupported("parenthesized query"));
            }
            return Err(self.error_here("a statement"));
        };
        let stmt = match first.as_str() {
            "select" => Statement::Select(self.select()?),
            "begin" | "start" => {
                self.i += 1;
                if first == "start" && !self.eat_word("transaction") {
                    return Err(self.error_here("TRANSACTION"));
                }
                self.skip_rest();
                Statement::Utility(Utility::Begin)
            }
            "commit" | "end" => {
                self.skip_rest();
                Statement::Utility(Utility::Commit)
            }
            "rollback" | "abort" => {
                self.skip_rest();
                Statement::Utility(Utility::Rollback)
            }
            "set" => {
                self.skip_rest();
                Statement::Utility(Utility::Set)
            }
            w if UNSUPPORTED_STATEMENTS.contains(&w) => return Err(SqlError::unsupported(w.to_ascii_uppercase())),
            _ => return Err(self.error_here("a statement")),
        };
        if !self.at_end() {
            return Err(self.error_here("end of statement"));
        }
        Ok(stmt)
    }

    fn skip_rest(&mut self) {
        self.i = self.toks.len();
    }

    fn select(&mut self) -> Result<Select, SqlError> {
        self.eat_word("select");
        if self.is_word("distinct") {
            return Err(SqlError::unsupported("DISTINCT"));
        }
        self.eat_word("all");
        let mut projections = Vec::new();
        loop {
            projections.push(self.projection()?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        let from = if self.eat_word("from") {
            Some(self.table_ref()?)
        } else {
            None
        };
        let where_clause = if self.eat_word("where") {
            Some(self.expr()?)
        } else {
            None
        };
        self.reject_clauses()?;
        let mut limit = None;
        if self.eat_word("limit") {
            limit = self.limit_value()?;
        }
        self.reject_clauses()?;
        if !self.at_end() {
            return Err(self.error_here("end of statement"));
        }
        Ok(Select {
            projections,
            from,
            where_clause,
            limit,
        })
    }

    fn limit_value(&mut self) -> Result<Option<u64>, SqlError> {
        let pos = self.pos();
        match self.next() {
            Some(Tok::Word(w)) if w == "all" => Ok(None),
            Some(Tok::Integer(n)) if *n >= 0 => Ok(Some(*n as u64)),
            Some(Tok::Minus) => Err(SqlError::syntax(pos, "LIMIT must not be negative")),
            _ => {
                self.i -= 1;
                Err(self.error_here("a non-negative integer after LIMIT"))
            }
        }
    }

    fn reject_clauses(&self) -> Result<(), SqlError> {
        let Some(Tok::Word(w)) = self.peek() else {
            return Ok(());
        };
        let what = match w.as_str() {
            "join" | "inner" | "left" | "right" | "full" | "cross" | "natural" => "JOIN",
            "group" => "GROUP BY",
            "order" => "ORDER BY",
            "having" => "HAVING",
            "offset" => "OFFSET",
            "union" => "UNION",
            "intersect" => "INTERSECT",
            "except" => "EXCEPT",
            "for" => "FOR UPDATE/SHARE",
            "window" => "WINDOW",
            "fetch" => "FETCH",
            _ => return Ok(()),
        };
        Err(SqlError::unsupported(what))
    }

    fn projection(&mut self) -> Result<Projection, SqlError> {
        if self.eat(&Tok::Star) {
            return Ok(Projection::Wildcard);
        }
        let expr = self.expr()?;
        let alias = if self.eat_word("as") {
            Some(self.identifier("an alias")?)
        } else {
            match self.peek() {
                Some(Tok::Word(w)) if !RESERVED.contains(&w.as_str()) => {
                    self.i += 1;
                    Some(w.clone())
                }
                Some(Tok::QuotedIdent(w)) => {
                    self.i += 1;
                    Some(w.clone())
                }
                _ => None,
            }
        };
        Ok(Projection::Expr { expr, alias })
    }

    fn identifier(&mut self, what: &str) -> Result<String, SqlError> {
        match self.peek() {
            Some(Tok::Word(w)) | Some(Tok::QuotedIdent(w)) => {
                self.i += 1;
                Ok(w.clone())
            }
            _ => Err(self.error_here(what)),
        }
    }

    fn table_ref(&mut self) -> Result<TableRef, SqlError> {
        if self.peek() == Some(&Tok::LParen) {
            return Err(SqlError::unsupported("subquery in FROM"));
        }
        if matches!(self.peek(), Some(Tok::Word(w)) if RESERVED.contains(&w.as_str())) {
            return Err(self.error_here("a table name"));
        }
        let pos = self.pos();
        let mut name = self.identifier("a table name")?;
        if self.eat(&Tok::Dot) {
            // schema qualification is accepted and ignored
            name = self.identifier("a table name")?;
        }
        if self.peek() == Some(&Tok::LParen) {
            return Err(SqlError::unsupported("table functions"));
        }
        if self.is_word("as")
            || matches!(self.peek(), Some(Tok::Word(w)) if !RESERVED.contains(&w.as_str()))
            || matches!(self.peek(), Some(Tok::QuotedIdent(_)))
        {
            return Err(SqlError::unsupported("table aliases"));
        }
        if self.peek() == Some(&Tok::Comma) {
            return Err(SqlError::unsupported("JOIN"));
        }
        self.reject_clauses()?;
        Ok(TableRef { name, pos })
    }

    fn expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.and_expr()?;
        while self.eat_word("or") {
            let right = self.and_expr()?;
            left = Expr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.not_expr()?;
        while self.eat_word("and") {
            let right = self.not_expr()?;
            left = Expr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, SqlError> {
        if self.eat_word("not") {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, SqlError> {
        let left = self.unary()?;
        self.reject_operators()?;
        if let Some(Tok::Op(op)) = self.peek() {
            let pos = self.pos();
            self.i += 1;
            let right = self.unary()?;
            self.reject_operators()?;
            if let Some(Tok::Op(_)) = self.peek() {
                return Err(self.error_here("AND, OR or end of expression"));
            }
            return Ok(Expr::Compare {
                op: *op,
                left: Box::new(left),
                right: Box::new(right),
                pos,
            });
        }
        Ok(left)
    }

    fn reject_operators(&self) -> Result<(), SqlError> {
        match self.peek() {
            Some(Tok::Plus | Tok::Minus | Tok::Star) => Err(SqlError::unsupported("arithmetic operators")),
            Some(Tok::Other(s)) if s == "::" => Err(SqlError::unsupported("type casts")),
            Some(Tok::Other(s)) if s == "/" || s == "%" || s == "^" => {
                Err(SqlError::unsupported("arithmetic operators"))
            }
            Some(Tok::Other(s)) if s == "|" => Err(SqlError::unsupported("string concatenation")),
            Some(Tok::Word(w)) => match w.as_str() {
                "is" => Err(SqlError::unsupported("IS")),
                "in" => Err(SqlError::unsupported("IN")),
                "between" => Err(SqlError::unsupported("BETWEEN")),
                "like" | "ilike" => Err(SqlError::unsupported("LIKE")),
                _ => Ok(()),
            },
            _ => Ok(()),
        }
    }

    fn unary(&mut self) -> Result<Expr, SqlError> {
        let pos = self.pos();
        if self.eat(&Tok::Minus) {
            return Ok(match self.unary()? {
                Expr::Integer(v) => Expr::Integer(-v),
                Expr::Number(v) => Expr::Number(-v),
                other => Expr::Neg(Box::new(other), pos),
            });
        }
        if self.eat(&Tok::Plus) {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, SqlError> {
        let pos = self.pos();
        match self.peek() {
            Some(Tok::Integer(v)) => {
                self.i += 1;
                Ok(Expr::Integer(*v))
            }
            Some(Tok::Number(v)) => {
                self.i += 1;
                Ok(Expr::Number(*v))
            }
            Some(Tok::Str(s)) => {
                self.i += 1;
                Ok(Expr::Str(s.clone()))
            }
            Some(Tok::LParen) => {
                if matches!(self.peek_at(1), Some(Tok::Word(w)) if w == "select") {
                    return Err(SqlError::unsupported("subquery"));
                }
                self.i += 1;
                let e = self.expr()?;
                self.expect(&Tok::RParen, "\")\"")?;
                Ok(e)
            }
            Some(Tok::QuotedIdent(name)) => {
                self.i += 1;
                Ok(Expr::Column {
                    name: name.clone(),
                    pos,
                })
            }
            Some(Tok::Word(w)) => {
                match w.as_str() {
                    "true" => {
                        self.i += 1;
                        return Ok(Expr::Bool(true));
                    }
                    "false" => {
                        self.i += 1;
                        return Ok(Expr::Bool(false));
                    }
                    "null" => return Err(SqlError::unsupported("NULL")),
                    "case" => return Err(SqlError::unsupported("CASE")),
                    "cast" => return Err(SqlError::unsupported("type casts")),
                    "exists" => return Err(SqlError::unsupported("subquery")),
                    _ => {}
                }
                if RESERVED.contains(&w.as_str()) {
                    return Err(self.error_here("an expression"));
                }
                self.i += 1;
                if self.eat(&Tok::LParen) {
                    return self.call_args(w.clone(), pos);
                }
                if self.eat(&Tok::Dot) {
                    // qualified column: the qualifier is checked by the planner
                    let col = self.identifier("a column name")?;
                    return Ok(Expr::Column {
                        name: format!("{w}.{col}"),
                        pos,
                    });
                }
                Ok(Expr::Column { name: w.clone(), pos })
            }
            _ => Err(self.error_here("an expression")),
        }
    }

    fn call_args(&mut self, name: String, pos: usize) -> Result<Expr, SqlError> {
        let mut args = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                if self.is_word("select") {
                    return Err(SqlError::unsupported("subquery"));
                }
                if self.peek() == Some(&Tok::Star) {
                    let p = self.pos();
                    self.i += 1;
                    args.push(Expr::Column {
                        name: "*".into(),
                        pos: p,
                    });
                } else {
                    args.push(self.expr()?);
                }
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(&Tok::Comma, "\",\" or \")\"")?;
            }
        }
        Ok(Expr::Call { name, args, pos })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Word(w) | Tok::QuotedIdent(w) => w.clone(),
        Tok::Integer(v) => v.to_string(),
        Tok::Number(v) => v.to_string(),
        Tok::Str(s) => format!("'{s}'"),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
        Tok::Comma => ",".into(),
        Tok::Semicolon => ";".into(),
        Tok::Star => "*".into(),
        Tok::Dot => ".".into(),
        Tok::Minus => "-".into(),
        Tok::Plus => "+".into(),
        Tok::Op(op) => op.symbol().into(),
        Tok::Other(s) => s.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sqlfe::lexer::CmpOp;

    fn select(sql: &str) -> Select {
        match parse_sql(sql).unwrap() {
            Statement::Select(s) => s,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_projections_no_where() {
        let s = select("SELECT id, ST_Volume(geom) FROM ores");
        assert_eq!(s.projections.len(), 2);
        assert_eq!(s.from.unwrap().name, "ores");
        assert!(s.where_clause.is_none());
        assert!(s.limit.is_none());
    }

    #[test]
    fn distance_filter_with_limit() {
        let s = select(
            "SELECT id FROM drills WHERE ST_3DDistance(geom, ST_GeomFromText('POINT Z (0 0 0)')) < 5.0 LIMIT 10",
        );
        assert_eq!(s.limit, Some(10));
        match s.where_clause.unwrap() {
            Expr::Compare {
                op: CmpOp::Lt,
                left,
                right,
                ..
            } => {
                assert!(matches!(*left, Expr::Call { ref name, .. } if name == "st_3ddistance"));
                assert_eq!(*right, Expr::Number(5.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn precedence() {
        let s = select("SELECT id FROM t WHERE NOT id = 1 OR id = 2 AND id = 3");
        let Some(Expr::Or(l, r)) = s.where_clause else { panic!() };
        assert!(matches!(*l, Expr::Not(_)));
        assert!(matches!(*r, Expr::And(_, _)));
    }

    #[test]
    fn unsupported_constructs() {
        for (sql, what) in [
            ("SELECT * FROM a JOIN b", "JOIN"),
            ("SELECT * FROM a LEFT JOIN b ON a.id = b.id", "JOIN"),
            ("SELECT * FROM a, b", "JOIN"),
            ("SELECT id FROM a GROUP BY id", "GROUP BY"),
            ("SELECT id FROM a ORDER BY id", "ORDER BY"),
            ("SELECT id FROM (SELECT id FROM a)", "subquery in FROM"),
            ("SELECT id FROM a WHERE id = (SELECT 1)", "subquery"),
            ("SELECT id FROM a WHERE id IN (1, 2)", "IN"),
            ("INSERT INTO a VALUES (1)", "INSERT"),
            ("SELECT id + 1 FROM a", "arithmetic operators"),
            ("SELECT DISTINCT id FROM a", "DISTINCT"),
        ] {
            match parse_sql(sql) {
                Err(SqlError::Unsupported(w)) => assert_eq!(w, what, "{sql}"),
                other => panic!("{sql}: {other:?}"),
            }
        }
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_sql("SELECT id FROM") {
            Err(SqlError::Syntax { position, .. }) => assert_eq!(position, 15),
            other => panic!("{other:?}"),
        }
        match parse_sql("SELECT id FROM t WHERE id < < 3") {
            Err(SqlError::Syntax { position, .. }) => assert_eq!(position, 29),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_sql("SELEC 1"),
            Err(SqlError::Syntax { position: 1, .. })
        ));
        assert!(matches!(parse_sql("SELECT 1 LIMIT -1"), Err(SqlError::Syntax { .. })));
    }

    #[test]
    fn scripts_and_utilities() {
        let stmts = parse_script("BEGIN; SELECT 1;; COMMIT;").unwrap();
        assert_eq!(stmts.len(), 3);
        assert_eq!(stmts[0], Statement::Utility(Utility::Begin));
        assert_eq!(stmts[2], Statement::Utility(Utility::Commit));
        assert!(parse_script("  ; -- nothing\n").unwrap().is_empty());
        assert_eq!(
            parse_sql("SET extra_float_digits = 3").unwrap(),
            Statement::Utility(Utility::Set)
        );
    }

    #[test]
    fn aliases_and_qualified_names() {
        let s = select("SELECT ST_Volume(geom) AS v, id ident FROM public.ores");
        assert!(matches!(&s.projections[0], Projection::Expr { alias: Some(a), .. } if a == "v"));
        assert!(matches!(&s.projections[1], Projection::Expr { alias: Some(a), .. } if a == "ident"));
        assert_eq!(s.from.unwrap().name, "ores");
        let s = select("SELECT ores.id FROM ores LIMIT ALL");
        assert!(s.limit.is_none());
    }
}
