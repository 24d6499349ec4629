use super::SqlError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    /// Unquoted identifiers and keywords, lowercased.
    Word(String),
    /// `"quoted"` identifier, case preserved.
    QuotedIdent(String),
    Integer(i64),
    Number(f64),
    Str(String),
    LParen,
    RParen,
    Comma,
    Semicolon,
    Star,
    Dot,
    Minus,
    Plus,
    Op(CmpOp),
    /// Anything else we recognise but do not support (`::`, `[`, ...).
    Other(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    /// 1-based character position in the query text.
    pub pos: usize,
}

pub fn tokenize(sql: &str) -> Result<Vec<Token>, SqlError> {
    let chars: Vec<char> = sql.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            loop {
                if i + 1 >= chars.len() {
                    return Err(SqlError::syntax(pos, "unterminated /* comment"));
                }
                if chars[i] == '*' && chars[i + 1] == '/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            continue;
        }
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            out.push(Token {
                tok: Tok::Word(word.to_ascii_lowercase()),
                pos,
            });
            continue;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let mut is_float = false;
            if i < chars.len() && chars[i] == '.' {
                is_float = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    is_float = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            if i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == '_') {
                return Err(SqlError::syntax(pos, "trailing junk after numeric literal"));
            }
            let text: String = chars[start..i].iter().collect();
            let parsed_int = if is_float { None } else { text.parse::<i64>().ok() };
            match parsed_int {
                Some(v) => Tok::Integer(v),
                None => {
                    let v: f64 = text
                        .parse()
                        .map_err(|_| SqlError::syntax(pos, format!("invalid number \"{text}\"")))?;
                    if !v.is_finite() {
                        return Err(SqlError::syntax(pos, format!("number \"{text}\" is out of range")));
                    }
                    Tok::Number(v)
                }
            }
        } else if c == '\'' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(SqlError::syntax(pos, "unterminated quoted string")),
                    Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                        s.push('\'');
                        i += 2;
                    }
                    Some('\'') => {
                        i += 1;
                        break;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), pos });
            continue;
        } else if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(SqlError::syntax(pos, "unterminated quoted identifier")),
                    Some('"') if chars.get(i + 1) == Some(&'"') => {
                        s.push('"');
                        i += 2;
                    }
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            if s.is_empty() {
                return Err(SqlError::syntax(pos, "zero-length delimited identifier"));
            }
            out.push(Token {
                tok: Tok::QuotedIdent(s),
                pos,
            });
            continue;
        } else {
            let next = chars.get(i + 1).copied();
            let (tok, width) = match (c, next) {
                ('<', Some('=')) => (Tok::Op(CmpOp::Le), 2),
                ('<', Some('>')) => (Tok::Op(CmpOp::Ne), 2),
                ('>', Some('=')) => (Tok::Op(CmpOp::Ge), 2),
                ('!', Some('=')) => (Tok::Op(CmpOp::Ne), 2),
                (':', Some(':')) => (Tok::Other("::".into()), 2),
                ('<', _) => (Tok::Op(CmpOp::Lt), 1),
                ('>', _) => (Tok::Op(CmpOp::Gt), 1),
                ('=', _) => (Tok::Op(CmpOp::Eq), 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                (',', _) => (Tok::Comma, 1),
                (';', _) => (Tok::Semicolon, 1),
                ('*', _) => (Tok::Star, 1),
                ('.', _) => (Tok::Dot, 1),
                ('-', _) => (Tok::Minus, 1),
                ('+', _) => (Tok::Plus, 1),
                ('[' | ']' | '/' | '%' | '^' | '|' | '&' | '~' | '!' | ':' | '@' | '#', _) => {
                    (Tok::Other(c.to_string()), 1)
                }
                _ => return Err(SqlError::syntax(pos, format!("unexpected character '{c}'"))),
            };
            i += width;
            tok
        };
        out.push(Token { tok, pos });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn basic_tokens() {
        assert_eq!(
            toks("SELECT id, 1.5e3 FROM T where x<>2 -- trailing"),
            vec![
                Tok::Word("select".into()),
                Tok::Word("id".into()),
                Tok::Comma,
                Tok::Number(1500.0),
                Tok::Word("from".into()),
                Tok::Word("t".into()),
                Tok::Word("where".into()),
                Tok::Word("x".into()),
                Tok::Op(CmpOp::Ne),
                Tok::Integer(2),
            ]
        );
    }

    #[test]
    fn strings_and_quoted_identifiers() {
        assert_eq!(
            toks("'it''s' \"My Table\""),
            vec![Tok::Str("it's".into()), Tok::QuotedIdent("My Table".into())]
        );
    }

    #[test]
    fn positions_are_one_based_chars() {
        let t = tokenize("SELECT  é, x").unwrap_err();
        assert!(matches!(t, SqlError::Syntax { position: 9, .. }), "{t:?}");
        let t = tokenize("a  b").unwrap();
        assert_eq!(t[1].pos, 4);
    }

    #[test]
    fn errors() {
        assert!(tokenize("'open").is_err());
        assert!(tokenize("/* open").is_err());
        assert!(tokenize("12abc").is_err());
        assert!(tokenize("1e999").is_err());
        assert_eq!(toks("99999999999999999999"), vec![Tok::Number(1e20)]);
    }
}
