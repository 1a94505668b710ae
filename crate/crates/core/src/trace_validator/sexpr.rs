//! A small S-expression reader for SMT-LIB2 text.

use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SExpr {
    /// Symbols, numerals, `#x`/`#b` literals and string literals. Quoted
    /// `|symbols|` lose their bars; strings keep their quotes.
    Atom { text: String, line: usize },
    List {
        items: Vec<SExpr>,
        line: usize,
        end_line: usize,
    },
}

impl SExpr {
    pub fn line(&self) -> usize {
        match self {
            SExpr::Atom { line, .. } | SExpr::List { line, .. } => *line,
        }
    }

    pub fn end_line(&self) -> usize {
        match self {
            SExpr::Atom { line, .. } => *line,
            SExpr::List { end_line, .. } => *end_line,
        }
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom { text, .. } => Some(text),
            SExpr::List { .. } => None,
        }
    }

    pub fn items(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List { items, .. } => Some(items),
            SExpr::Atom { .. } => None,
        }
    }

    /// The leading atom of a list.
    pub fn head(&self) -> Option<&str> {
        self.items()?.first()?.atom()
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Atom { text, .. } => f.write_str(text),
            SExpr::List { items, .. } => {
                f.write_str("(")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{it}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

pub fn parse_all(text: &str) -> Result<Vec<SExpr>, ParseError> {
    let mut p = Reader {
        chars: text.chars().collect(),
        pos: 0,
        line: 1,
    };
    let mut out = Vec::new();
    loop {
        p.skip_blank();
        if p.pos >= p.chars.len() {
            return Ok(out);
        }
        out.push(p.expr()?);
    }
}

struct Reader {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Reader {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn skip_blank(&mut self) {
        while let Some(c) = self.peek() {
            if c == ';' {
                while self.peek().is_some_and(|c| c != '\n') {
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn err<T>(&self, line: usize, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            line,
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<SExpr, ParseError> {
        let line = self.line;
        match self.peek() {
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_blank();
                    match self.peek() {
                        None => return self.err(line, "unclosed `(`"),
                        Some(')') => {
                            let end_line = self.line;
                            self.bump();
                            return Ok(SExpr::List { items, line, end_line });
                        }
                        Some(_) => items.push(self.expr()?),
                    }
                }
            }
            Some(')') => self.err(line, "unexpected `)`"),
            Some('|') => {
                self.bump();
                let mut text = String::new();
                loop {
                    match self.bump() {
                        None => return self.err(line, "unterminated `|` symbol"),
                        Some('|') => return Ok(SExpr::Atom { text, line }),
                        Some(c) => text.push(c),
                    }
                }
            }
            Some('"') => {
                self.bump();
                let mut text = String::from('"');
                loop {
                    match self.bump() {
                        None => return self.err(line, "unterminated string literal"),
                        Some('"') if self.peek() == Some('"') => {
                            self.bump();
                            text.push_str("\"\"");
                        }
                        Some('"') => {
                            text.push('"');
                            return Ok(SExpr::Atom { text, line });
                        }
                        Some(c) => text.push(c),
                    }
                }
            }
            Some(_) => {
                let mut text = String::new();
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | ';' | '|' | '"') {
                        break;
                    }
                    text.push(c);
                    self.bump();
                }
                Ok(SExpr::Atom { text, line })
            }
            None => self.err(line, "unexpected end of input"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_lists_and_lines() {
        let e = parse_all("; header\n(trace\n  (read-reg |cur_privilege| nil Machine)\n)\n").unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].head(), Some("trace"));
        assert_eq!((e[0].line(), e[0].end_line()), (2, 4));
        let ev = &e[0].items().unwrap()[1];
        assert_eq!(ev.line(), 3);
        assert_eq!(ev.to_string(), "(read-reg cur_privilege nil Machine)");
    }

    #[test]
    fn literals() {
        let e = parse_all("(define-const v1 (_ BitVec 64) #x00ff \"a \"\"b\"\" c\")").unwrap();
        let items = e[0].items().unwrap();
        assert_eq!(items[3].atom(), Some("#x00ff"));
        assert_eq!(items[4].atom(), Some("\"a \"\"b\"\" c\""));
    }

    #[test]
    fn errors_carry_lines() {
        assert_eq!(parse_all("(a\n(b)\n").unwrap_err().line, 1);
        assert_eq!(parse_all("(a)\n)").unwrap_err().line, 2);
        assert_eq!(parse_all("\n\n(|abc").unwrap_err().line, 3);
        assert!(parse_all("").unwrap().is_empty());
    }
}
