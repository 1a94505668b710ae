//! Pattern-driven parsing of a pragmatic subset of Sail.
//!
//! The parser recognizes declarations (registers, bitfields, type aliases,
//! enums, unions, mappings, `val` externs, overloads) and function
//! definitions, including scattered `function clause` definitions and
//! instruction `execute` clauses. Function bodies are not parsed into an
//! AST: register reads and writes, call sites and `if` conditionals are
//! harvested token-wise, so constructs outside the subset still contribute
//! their accesses.

mod body;
mod corpus;
mod lexer;
mod parser;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::ops::Range;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::state::StateRef;

pub use body::{analyze_body, RegisterIndex, RegisterShape};
pub use corpus::{collect_sail_files, parse_corpus, parse_sources, SailModel};
pub use lexer::{is_keyword, tokenize, Token, TokenKind};
pub use parser::parse_unit;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Location {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Error)]
pub enum SyntaxError {
    #[error("{0}: unterminated block comment")]
    UnterminatedComment(Location),
    #[error("{0}: unterminated string literal")]
    UnterminatedStringLiteral(Location),
    #[error("{second}: duplicate definition of `{name}` (first defined at {first})")]
    DuplicateDefinition {
        name: String,
        first: Location,
        second: Location,
    },
    #[error("{second}: `{name}` is already defined in another file at {first}")]
    CrossFileDuplicate {
        name: String,
        first: Location,
        second: Location,
    },
    #[error("{location}: malformed declaration, expected {expected}")]
    MalformedDeclaration { location: Location, expected: String },
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("no Sail source files given")]
    EmptyCorpus,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RegisterType {
    /// A named type: `bits(N)`, an alias, a bitfield type or an enum.
    Named(String),
    /// `vector(len, dec, elem)`: a register bank.
    Vector { len: u32, elem: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterDecl {
    pub name: String,
    pub ty: RegisterType,
    pub location: Location,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitfieldField {
    pub name: String,
    pub high: u32,
    pub low: u32,
}

impl BitfieldField {
    pub fn width(&self) -> u32 {
        self.high - self.low + 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitfieldDecl {
    pub name: String,
    pub width: u32,
    pub fields: Vec<BitfieldField>,
    pub location: Location,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypeTarget {
    Bits(u32),
    Named(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeAlias {
    pub name: String,
    pub target: TypeTarget,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumDecl {
    pub name: String,
    pub members: Vec<String>,
}

/// `mapping` clauses, kept as literal pairs (`0x300 <-> "mstatus"`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MappingDecl {
    pub name: String,
    pub pairs: Vec<(String, String)>,
}

/// A call site inside a body, with indices into the body token slice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallSite {
    pub name: String,
    pub at: usize,
    /// Token range of the arguments, between the parentheses.
    pub args: Range<usize>,
    /// The call is the target of an assignment (`X(rd) = v`).
    pub assigned: bool,
}

/// An `if` expression, with token ranges into the body slice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Conditional {
    pub at: usize,
    pub condition: Range<usize>,
    pub then_arm: Range<usize>,
    pub else_arm: Option<Range<usize>>,
}

impl Conditional {
    pub fn end(&self) -> usize {
        self.else_arm.as_ref().map_or(self.then_arm.end, |r| r.end)
    }
}

/// A construct outside the supported subset. Accesses inside it are still
/// harvested.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpaqueSpan {
    pub location: Location,
    pub tokens: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BodyFacts {
    pub calls: Vec<CallSite>,
    pub reads: BTreeSet<StateRef>,
    pub writes: BTreeSet<StateRef>,
    pub conditionals: Vec<Conditional>,
    pub opaque: Vec<OpaqueSpan>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionClause {
    pub location: Location,
    /// Tokens between the function name and the `=` of the definition.
    pub header: Vec<Token>,
    pub body: Vec<Token>,
    pub facts: BodyFacts,
}

/// A function; scattered `function clause` definitions are merged into one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: String,
    pub location: Location,
    pub scattered: bool,
    pub clauses: Vec<FunctionClause>,
    pub callees: BTreeSet<String>,
    pub state_reads: BTreeSet<StateRef>,
    pub state_writes: BTreeSet<StateRef>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecuteClause {
    pub instruction: String,
    pub operands: Vec<String>,
    pub location: Location,
    pub body: Vec<Token>,
    pub facts: BodyFacts,
    pub callees: BTreeSet<String>,
    pub state_reads: BTreeSet<StateRef>,
    pub state_writes: BTreeSet<StateRef>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: String,
    pub registers: Vec<RegisterDecl>,
    pub bitfield_types: Vec<BitfieldDecl>,
    pub type_aliases: Vec<TypeAlias>,
    pub enums: Vec<EnumDecl>,
    pub constructors: Vec<String>,
    pub functions: Vec<FunctionDef>,
    pub execute_clauses: Vec<ExecuteClause>,
    pub mappings: Vec<MappingDecl>,
    /// Names declared with `val` (definitions may live elsewhere).
    pub vals: Vec<String>,
    pub overloads: Vec<(String, Vec<String>)>,
    pub opaque: Vec<OpaqueSpan>,
}

impl FunctionDef {
    pub(crate) fn refresh_summary(&mut self) {
        self.state_reads = self
            .clauses
            .iter()
            .flat_map(|c| c.facts.reads.iter().cloned())
            .collect();
        self.state_writes = self
            .clauses
            .iter()
            .flat_map(|c| c.facts.writes.iter().cloned())
            .collect();
    }

    pub fn call_names(&self) -> impl Iterator<Item = &str> {
        self.clauses
            .iter()
            .flat_map(|c| c.facts.calls.iter().map(|s| s.name.as_str()))
    }
}

impl ExecuteClause {
    pub(crate) fn refresh_summary(&mut self) {
        self.state_reads = self.facts.reads.clone();
        self.state_writes = self.facts.writes.clone();
    }
}

pub(crate) type NameSet = BTreeSet<String>;
pub(crate) type OverloadMap = BTreeMap<String, Vec<String>>;
