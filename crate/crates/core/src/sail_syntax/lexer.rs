//! Lexer for the Sail subset.
//!
//! Every byte of the input is either inside a token or skipped whitespace,
//! so the token stream reconstructs the source exactly.

use std::ops::Range;
use std::sync::Arc;

use super::{Location, SyntaxError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Keyword,
    Identifier,
    Operator,
    Literal,
    Comment,
    Punctuation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub location: Location,
    /// Byte range in the source file.
    pub span: Range<usize>,
}

impl Token {
    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_punct(&self, text: &str) -> bool {
        self.is(TokenKind::Punctuation, text)
    }

    pub fn is_op(&self, text: &str) -> bool {
        self.is(TokenKind::Operator, text)
    }

    pub fn is_keyword(&self, text: &str) -> bool {
        self.is(TokenKind::Keyword, text)
    }

    pub fn is_ident(&self) -> bool {
        self.kind == TokenKind::Identifier
    }
}

pub const KEYWORDS: &[&str] = &[
    "and",
    "as",
    "assert",
    "bitfield",
    "by",
    "cast",
    "catch",
    "clause",
    "constraint",
    "dec",
    "default",
    "do",
    "effect",
    "else",
    "end",
    "enum",
    "exit",
    "forall",
    "foreach",
    "from",
    "function",
    "if",
    "impl",
    "in",
    "inc",
    "infix",
    "infixl",
    "infixr",
    "instantiation",
    "let",
    "mapping",
    "match",
    "monadic",
    "mutual",
    "newtype",
    "or",
    "overload",
    "pure",
    "ref",
    "register",
    "repeat",
    "return",
    "scattered",
    "sizeof",
    "struct",
    "termination_measure",
    "then",
    "throw",
    "to",
    "try",
    "type",
    "undefined",
    "union",
    "until",
    "val",
    "var",
    "while",
    "with",
];

const OPERATORS: &[&str] = &[
    "<->", ">=_u", "<=_u", ">=_s", "<=_s", "==", "!=", "<=", ">=", "=>", "->", "<-", "..", "::", "&&", "||", ">_u",
    "<_u", ">_s", "<_s", "=", "<", ">", "+", "-", "*", "/", "%", "&", "|", "^", "~", "!", "@", ":", "?",
];

const PUNCTUATION: &[char] = &['(', ')', '{', '}', '[', ']', ',', ';', '.'];

pub fn is_keyword(text: &str) -> bool {
    KEYWORDS.binary_search(&text).is_ok()
}

pub fn tokenize(source: &str, path: &str) -> Result<Vec<Token>, SyntaxError> {
    Lexer::new(source, path).run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    file: Arc<str>,
    pos: usize,
    line: u32,
    col: u32,
    tokens: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, path: &str) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            file: Arc::from(path),
            pos: 0,
            line: 1,
            col: 1,
            tokens: Vec::new(),
        }
    }

    fn location(&self) -> Location {
        Location {
            file: self.file.clone(),
            line: self.line,
            column: self.col,
        }
    }

    fn peek(&self, offset: usize) -> Option<u8> {
        self.bytes.get(self.pos + offset).copied()
    }

    fn advance_to(&mut self, end: usize) {
        for ch in self.src[self.pos..end].chars() {
            if ch == '\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        self.pos = end;
    }

    fn push(&mut self, kind: TokenKind, end: usize) {
        let location = self.location();
        let start = self.pos;
        self.advance_to(end);
        self.tokens.push(Token {
            kind,
            text: self.src[start..end].to_string(),
            location,
            span: start..end,
        });
    }

    fn run(mut self) -> Result<Vec<Token>, SyntaxError> {
        while let Some(b) = self.peek(0) {
            match b {
                b' ' | b'\t' | b'\r' | b'\n' => {
                    let end = self.scan_while(self.pos, |c| c.is_ascii_whitespace());
                    self.advance_to(end);
                }
                b'/' if self.peek(1) == Some(b'/') => {
                    let end = self.src[self.pos..].find('\n').map_or(self.src.len(), |i| self.pos + i);
                    self.push(TokenKind::Comment, end);
                }
                b'/' if self.peek(1) == Some(b'*') => {
                    let end = self.block_comment_end()?;
                    self.push(TokenKind::Comment, end);
                }
                b'"' => {
                    let end = self.string_end()?;
                    self.push(TokenKind::Literal, end);
                }
                b'0'..=b'9' => {
                    let end = self.number_end();
                    self.push(TokenKind::Literal, end);
                }
                b'$' if self.peek(1).is_some_and(|c| c.is_ascii_alphabetic()) => {
                    let end = self.scan_while(self.pos + 1, is_ident_char);
                    self.push(TokenKind::Keyword, end);
                }
                b'\'' if self.peek(1).is_some_and(is_ident_start) => {
                    let end = self.scan_while(self.pos + 1, is_ident_char);
                    self.push(TokenKind::Identifier, end);
                }
                c if is_ident_start(c) => {
                    let end = self.scan_while(self.pos, is_ident_char);
                    let text = &self.src[self.pos..end];
                    let kind = if text == "true" || text == "false" {
                        TokenKind::Literal
                    } else if is_keyword(text) {
                        TokenKind::Keyword
                    } else {
                        TokenKind::Identifier
                    };
                    self.push(kind, end);
                }
                _ => self.operator_or_punct(),
            }
        }
        Ok(self.tokens)
    }

    fn scan_while(&self, from: usize, pred: impl Fn(u8) -> bool) -> usize {
        let mut end = from;
        while end < self.bytes.len() && pred(self.bytes[end]) {
            end += 1;
        }
        end
    }

    fn block_comment_end(&self) -> Result<usize, SyntaxError> {
        // Sail block comments nest.
        let mut depth = 0usize;
        let mut i = self.pos;
        while i + 1 < self.bytes.len() {
            match (self.bytes[i], self.bytes[i + 1]) {
                (b'/', b'*') => {
                    depth += 1;
                    i += 2;
                }
                (b'*', b'/') => {
                    depth -= 1;
                    i += 2;
                    if depth == 0 {
                        return Ok(i);
                    }
                }
                _ => i += 1,
            }
        }
        Err(SyntaxError::UnterminatedComment(self.location()))
    }

    fn string_end(&self) -> Result<usize, SyntaxError> {
        let mut i = self.pos + 1;
        while i < self.bytes.len() {
            match self.bytes[i] {
                b'\\' => i += 2,
                b'"' => return Ok(i + 1),
                _ => i += 1,
            }
        }
        Err(SyntaxError::UnterminatedStringLiteral(self.location()))
    }

    fn number_end(&self) -> usize {
        let start = self.pos;
        match (self.peek(0), self.peek(1)) {
            (Some(b'0'), Some(b'x' | b'X')) => self.scan_while(start + 2, |c| c.is_ascii_hexdigit() || c == b'_'),
            (Some(b'0'), Some(b'b' | b'B')) => self.scan_while(start + 2, |c| c == b'0' || c == b'1' || c == b'_'),
            _ => self.scan_while(start, |c| c.is_ascii_digit() || c == b'_'),
        }
    }

    fn operator_or_punct(&mut self) {
        let rest = &self.src[self.pos..];
        for op in OPERATORS {
            if let Some(after) = rest.strip_prefix(op) {
                // `>=_u` must not swallow the start of an identifier such as `>=_under`.
                if (op.ends_with("_u") || op.ends_with("_s")) && after.bytes().next().is_some_and(is_ident_char) {
                    continue;
                }
                let end = self.pos + op.len();
                self.push(TokenKind::Operator, end);
                return;
            }
        }
        let ch = rest.chars().next().expect("non-empty rest");
        let end = self.pos + ch.len_utf8();
        if PUNCTUATION.contains(&ch) {
            self.push(TokenKind::Punctuation, end);
        } else {
            // Unknown characters are kept as single-char operators so the
            // stream stays total.
            self.push(TokenKind::Operator, end);
        }
    }
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'\'' || c == b'#'
}
