//! Top-level declaration recognition.

use std::collections::BTreeMap;

use super::body::{analyze_body, bracket, matching, RegisterIndex, RegisterShape};
use super::lexer::{tokenize, Token, TokenKind};
use super::{
    BitfieldDecl, BitfieldField, EnumDecl, ExecuteClause, FunctionClause, FunctionDef, Location, MappingDecl,
    OpaqueSpan, RegisterDecl, RegisterType, SourceUnit, SyntaxError, TypeAlias, TypeTarget,
};

const TOP_LEVEL: &[&str] = &[
    "bitfield",
    "default",
    "end",
    "enum",
    "function",
    "infix",
    "infixl",
    "infixr",
    "mapping",
    "newtype",
    "overload",
    "register",
    "scattered",
    "struct",
    "termination_measure",
    "type",
    "union",
    "val",
];

fn starts_decl(t: &Token) -> bool {
    t.kind == TokenKind::Keyword && (TOP_LEVEL.contains(&t.text.as_str()) || t.text.starts_with('$'))
}

/// Parses one source file. Function bodies are analyzed against the
/// registers declared in the same file; a corpus re-analyzes them against
/// all registers.
pub fn parse_unit(source: &str, path: &str) -> Result<SourceUnit, SyntaxError> {
    let toks: Vec<Token> = tokenize(source, path)?
        .into_iter()
        .filter(|t| t.kind != TokenKind::Comment)
        .collect();
    let mut p = Parser {
        toks: &toks,
        unit: SourceUnit {
            path: path.to_string(),
            ..SourceUnit::default()
        },
        function_slots: BTreeMap::new(),
    };
    p.run()?;
    let mut unit = p.unit;
    let index = local_index(&unit);
    for f in &mut unit.functions {
        for c in &mut f.clauses {
            c.facts = analyze_body(&c.body, &index);
        }
        f.refresh_summary();
        f.callees = f.call_names().map(str::to_string).collect();
    }
    for e in &mut unit.execute_clauses {
        e.facts = analyze_body(&e.body, &index);
        e.refresh_summary();
        e.callees = e.facts.calls.iter().map(|c| c.name.clone()).collect();
    }
    let ctors: std::collections::BTreeSet<&String> = unit.constructors.iter().collect();
    for f in &mut unit.functions {
        f.callees.retain(|c| !ctors.contains(c));
    }
    for e in &mut unit.execute_clauses {
        e.callees.retain(|c| !ctors.contains(c));
    }
    Ok(unit)
}

pub(crate) fn local_index(unit: &SourceUnit) -> RegisterIndex {
    let bitfields: BTreeMap<&str, &BitfieldDecl> = unit.bitfield_types.iter().map(|b| (b.name.as_str(), b)).collect();
    let mut index = RegisterIndex::default();
    for r in &unit.registers {
        index.insert(&r.name, shape_of(r, |n| bitfields.get(n).copied()));
    }
    index
}

pub(crate) fn shape_of<'a>(r: &RegisterDecl, bitfield: impl Fn(&str) -> Option<&'a BitfieldDecl>) -> RegisterShape {
    match &r.ty {
        RegisterType::Named(ty) => RegisterShape {
            fields: bitfield(ty)
                .map(|b| b.fields.iter().map(|f| f.name.clone()).collect())
                .unwrap_or_default(),
            bank: false,
        },
        RegisterType::Vector { .. } => RegisterShape {
            fields: Default::default(),
            bank: true,
        },
    }
}

struct Parser<'a> {
    toks: &'a [Token],
    unit: SourceUnit,
    function_slots: BTreeMap<String, usize>,
}

impl<'a> Parser<'a> {
    fn tok(&self, i: usize) -> Option<&'a Token> {
        self.toks.get(i)
    }

    /// End of the declaration starting at `i`: the next top-level keyword at
    /// bracket depth zero.
    fn decl_end(&self, i: usize) -> usize {
        let mut depth = 0i32;
        let mut k = i + 1;
        while k < self.toks.len() {
            let t = &self.toks[k];
            if depth <= 0 && starts_decl(t) {
                break;
            }
            depth += bracket(t);
            k += 1;
        }
        k
    }

    fn malformed(&self, i: usize, expected: &str) -> SyntaxError {
        let location = self
            .tok(i)
            .or_else(|| self.toks.last())
            .map(|t| t.location.clone())
            .unwrap_or_else(|| Location {
                file: self.unit.path.as_str().into(),
                line: 1,
                column: 1,
            });
        SyntaxError::MalformedDeclaration {
            location,
            expected: expected.to_string(),
        }
    }

    fn ident(&self, i: usize, expected: &str) -> Result<&'a Token, SyntaxError> {
        match self.tok(i) {
            Some(t) if t.is_ident() => Ok(t),
            _ => Err(self.malformed(i, expected)),
        }
    }

    fn run(&mut self) -> Result<(), SyntaxError> {
        let mut i = 0;
        while i < self.toks.len() {
            let t = &self.toks[i];
            let end = if t.is_keyword("scattered") {
                (i + 3).min(self.toks.len())
            } else {
                self.decl_end(i)
            };
            if t.kind == TokenKind::Keyword {
                match t.text.as_str() {
                    "register" => self.register(i, end)?,
                    "bitfield" => self.bitfield(i, end)?,
                    "type" => self.type_alias(i, end),
                    "enum" => self.enumeration(i, end)?,
                    "union" => self.union(i, end),
                    "mapping" => self.mapping(i, end),
                    "function" => self.function(i, end)?,
                    "val" => self.val(i)?,
                    "overload" => self.overload(i, end),
                    "scattered" => self.scattered(i),
                    _ if starts_decl(t) => {}
                    _ => self.opaque(i, end, "unrecognized top-level construct"),
                }
            } else {
                self.opaque(i, end, "unrecognized top-level construct");
            }
            i = end;
        }
        Ok(())
    }

    fn opaque(&mut self, i: usize, end: usize, reason: &str) {
        self.unit.opaque.push(OpaqueSpan {
            location: self.toks[i].location.clone(),
            tokens: end - i,
            reason: reason.to_string(),
        });
    }

    fn register(&mut self, i: usize, end: usize) -> Result<(), SyntaxError> {
        let mut k = i + 1;
        if self.tok(k).is_some_and(|t| t.text == "configuration") {
            k += 1;
        }
        let name = self.ident(k, "register name")?;
        if !self.tok(k + 1).is_some_and(|t| t.is_op(":")) {
            return Err(self.malformed(k + 1, "`:` after register name"));
        }
        let ty_start = k + 2;
        let mut ty_end = ty_start;
        let mut depth = 0;
        while ty_end < end {
            let t = &self.toks[ty_end];
            if depth == 0 && t.is_op("=") {
                break;
            }
            depth += bracket(t);
            ty_end += 1;
        }
        let ty_toks = &self.toks[ty_start..ty_end];
        if ty_toks.is_empty() {
            return Err(self.malformed(ty_start, "register type"));
        }
        let ty = if ty_toks[0].text == "vector" {
            let len = ty_toks
                .get(2)
                .and_then(|t| parse_int(&t.text))
                .ok_or_else(|| self.malformed(ty_start + 2, "vector length"))?;
            let elem_start = ty_toks
                .iter()
                .rposition(|t| t.is_punct(","))
                .ok_or_else(|| self.malformed(ty_start, "vector element type"))?;
            let elem = join(&ty_toks[elem_start + 1..ty_toks.len() - 1]);
            RegisterType::Vector { len, elem }
        } else {
            RegisterType::Named(join(ty_toks))
        };
        let decl = RegisterDecl {
            name: name.text.clone(),
            ty,
            location: name.location.clone(),
        };
        if let Some(prev) = self.unit.registers.iter().find(|r| r.name == decl.name) {
            return Err(SyntaxError::DuplicateDefinition {
                name: decl.name,
                first: prev.location.clone(),
                second: name.location.clone(),
            });
        }
        self.unit.registers.push(decl);
        Ok(())
    }

    fn bitfield(&mut self, i: usize, end: usize) -> Result<(), SyntaxError> {
        let name = self.ident(i + 1, "bitfield name")?;
        let width = (i + 2..end)
            .find(|&k| self.toks[k].text == "bits")
            .and_then(|k| self.tok(k + 2))
            .and_then(|t| parse_int(&t.text))
            .ok_or_else(|| self.malformed(i + 2, "`bits(N)` width"))?;
        let open = (i + 2..end)
            .find(|&k| self.toks[k].is_punct("{"))
            .ok_or_else(|| self.malformed(i + 2, "`{` opening bitfield fields"))?;
        let close = matching(self.toks, open).ok_or_else(|| self.malformed(open, "closing `}`"))?;
        let mut fields = Vec::new();
        for entry in self.toks[open + 1..close].split(|t| t.is_punct(",")) {
            if entry.is_empty() {
                continue;
            }
            let ok = entry.len() >= 3 && entry[0].is_ident() && entry[1].is_op(":");
            let hi = entry.get(2).and_then(|t| parse_int(&t.text));
            let lo = match entry.get(3) {
                Some(t) if t.is_op("..") => entry.get(4).and_then(|t| parse_int(&t.text)),
                None => hi,
                _ => None,
            };
            match (ok, hi, lo) {
                (true, Some(high), Some(low)) if low <= high && high < width => fields.push(BitfieldField {
                    name: entry[0].text.clone(),
                    high,
                    low,
                }),
                _ => {
                    let at = self
                        .toks
                        .iter()
                        .position(|t| std::ptr::eq(t, &entry[0]))
                        .unwrap_or(open);
                    return Err(self.malformed(at, "`FIELD : high [.. low]` within the bitfield width"));
                }
            }
        }
        self.unit.bitfield_types.push(BitfieldDecl {
            name: name.text.clone(),
            width,
            fields,
            location: name.location.clone(),
        });
        Ok(())
    }

    fn type_alias(&mut self, i: usize, end: usize) {
        let (Some(name), Some(eq)) = (self.tok(i + 1), self.tok(i + 2)) else {
            return;
        };
        if !name.is_ident() || !eq.is_op("=") {
            return;
        }
        let rhs = &self.toks[(i + 3).min(end)..end];
        let target = match rhs {
            [b, open, n, close] if b.text == "bits" && open.is_punct("(") && close.is_punct(")") => {
                match parse_int(&n.text) {
                    Some(w) => TypeTarget::Bits(w),
                    None => return,
                }
            }
            [other] if other.is_ident() => TypeTarget::Named(other.text.clone()),
            _ => return,
        };
        self.unit.type_aliases.push(TypeAlias {
            name: name.text.clone(),
            target,
        });
    }

    fn enumeration(&mut self, i: usize, end: usize) -> Result<(), SyntaxError> {
        let name = self.ident(i + 1, "enum name")?;
        let Some(open) = (i + 2..end).find(|&k| self.toks[k].is_punct("{")) else {
            return Err(self.malformed(i + 2, "`{` opening enum members"));
        };
        let close = matching(self.toks, open).ok_or_else(|| self.malformed(open, "closing `}`"))?;
        let members = self.toks[open + 1..close]
            .iter()
            .filter(|t| t.is_ident())
            .map(|t| t.text.clone())
            .collect();
        self.unit.enums.push(EnumDecl {
            name: name.text.clone(),
            members,
        });
        Ok(())
    }

    fn union(&mut self, i: usize, end: usize) {
        if self.tok(i + 1).is_some_and(|t| t.is_keyword("clause")) {
            // union clause ast = CONSTR : type
            if let Some(c) = self.tok(i + 4).filter(|t| t.is_ident()) {
                self.unit.constructors.push(c.text.clone());
            }
            return;
        }
        let Some(open) = (i + 1..end).find(|&k| self.toks[k].is_punct("{")) else {
            return;
        };
        let Some(close) = matching(self.toks, open) else {
            return;
        };
        let mut depth = 0;
        for k in open + 1..close {
            let t = &self.toks[k];
            if depth == 0 && t.is_ident() && self.toks[k + 1].is_op(":") {
                self.unit.constructors.push(t.text.clone());
            }
            depth += bracket(t);
        }
    }

    fn mapping(&mut self, i: usize, end: usize) {
        let clause = self.tok(i + 1).is_some_and(|t| t.is_keyword("clause"));
        let Some(name) = self.tok(i + if clause { 2 } else { 1 }) else {
            return;
        };
        let mut pairs = Vec::new();
        for k in i + 1..end {
            if self.toks[k].is_op("<->") {
                let (l, r) = (&self.toks[k - 1], self.tok(k + 1));
                if let Some(r) = r {
                    if l.kind == TokenKind::Literal && r.kind == TokenKind::Literal {
                        pairs.push((l.text.clone(), r.text.clone()));
                    }
                }
            }
        }
        if let Some(m) = self.unit.mappings.iter_mut().find(|m| m.name == name.text) {
            m.pairs.extend(pairs);
        } else {
            self.unit.mappings.push(MappingDecl {
                name: name.text.clone(),
                pairs,
            });
        }
    }

    fn val(&mut self, i: usize) -> Result<(), SyntaxError> {
        let name = self
            .tok(i + 1)
            .filter(|t| t.kind != TokenKind::Punctuation)
            .ok_or_else(|| self.malformed(i + 1, "name after `val`"))?;
        self.unit.vals.push(name.text.clone());
        Ok(())
    }

    fn overload(&mut self, i: usize, end: usize) {
        let Some(name) = self.tok(i + 1) else { return };
        let members = self.toks[i + 2..end]
            .iter()
            .filter(|t| t.is_ident())
            .map(|t| t.text.clone())
            .collect();
        self.unit.overloads.push((name.text.clone(), members));
    }

    fn scattered(&mut self, i: usize) {
        if let (Some(kind), Some(name)) = (self.tok(i + 1), self.tok(i + 2)) {
            if kind.is_keyword("function") {
                self.function_slot(&name.text, &name.location, true);
            }
        }
    }

    fn function_slot(&mut self, name: &str, location: &Location, scattered: bool) -> usize {
        if let Some(&slot) = self.function_slots.get(name) {
            return slot;
        }
        self.unit.functions.push(FunctionDef {
            name: name.to_string(),
            location: location.clone(),
            scattered,
            clauses: Vec::new(),
            callees: Default::default(),
            state_reads: Default::default(),
            state_writes: Default::default(),
        });
        let slot = self.unit.functions.len() - 1;
        self.function_slots.insert(name.to_string(), slot);
        slot
    }

    fn function(&mut self, i: usize, end: usize) -> Result<(), SyntaxError> {
        let clause = self.tok(i + 1).is_some_and(|t| t.is_keyword("clause"));
        let name_at = if clause { i + 2 } else { i + 1 };
        let name = self.ident(name_at, "function name")?;
        let mut eq = None;
        let mut depth = 0;
        for k in name_at + 1..end {
            let t = &self.toks[k];
            if depth == 0 && t.is_op("=") {
                eq = Some(k);
                break;
            }
            depth += bracket(t);
        }
        let eq = eq.ok_or_else(|| self.malformed(name_at + 1, "`=` before the function body"))?;
        let header = self.toks[name_at + 1..eq].to_vec();
        let body = self.toks[eq + 1..end].to_vec();
        if clause && name.text == "execute" {
            return self.execute_clause(name_at, header, body);
        }
        if !clause {
            if let Some(&slot) = self.function_slots.get(&name.text) {
                let prev = &self.unit.functions[slot];
                if !prev.scattered || !prev.clauses.is_empty() {
                    return Err(SyntaxError::DuplicateDefinition {
                        name: name.text.clone(),
                        first: prev.location.clone(),
                        second: name.location.clone(),
                    });
                }
            }
        }
        let slot = self.function_slot(&name.text, &name.location, clause);
        self.unit.functions[slot].clauses.push(FunctionClause {
            location: name.location.clone(),
            header,
            body,
            facts: Default::default(),
        });
        Ok(())
    }

    fn execute_clause(&mut self, name_at: usize, header: Vec<Token>, body: Vec<Token>) -> Result<(), SyntaxError> {
        let ctor_pos = header
            .iter()
            .position(|t| t.is_ident())
            .ok_or_else(|| self.malformed(name_at + 1, "instruction constructor in execute clause"))?;
        let ctor = &header[ctor_pos];
        let mut operands = Vec::new();
        if header.get(ctor_pos + 1).is_some_and(|t| t.is_punct("(")) {
            if let Some(close) = matching(&header, ctor_pos + 1) {
                let mut depth = 0;
                for t in &header[ctor_pos + 2..close] {
                    if depth == 0 && t.is_ident() {
                        operands.push(t.text.clone());
                    }
                    depth += bracket(t);
                }
            }
        }
        if let Some(prev) = self.unit.execute_clauses.iter().find(|e| e.instruction == ctor.text) {
            return Err(SyntaxError::DuplicateDefinition {
                name: ctor.text.clone(),
                first: prev.location.clone(),
                second: ctor.location.clone(),
            });
        }
        self.unit.execute_clauses.push(ExecuteClause {
            instruction: ctor.text.clone(),
            operands,
            location: ctor.location.clone(),
            body,
            facts: Default::default(),
            callees: Default::default(),
            state_reads: Default::default(),
            state_writes: Default::default(),
        });
        Ok(())
    }
}

pub(crate) fn parse_int(text: &str) -> Option<u32> {
    let clean: String = text.chars().filter(|&c| c != '_').collect();
    if let Some(hex) = clean.strip_prefix("0x").or_else(|| clean.strip_prefix("0X")) {
        u32::from_str_radix(hex, 16).ok()
    } else if let Some(bin) = clean.strip_prefix("0b").or_else(|| clean.strip_prefix("0B")) {
        u32::from_str_radix(bin, 2).ok()
    } else {
        clean.parse().ok()
    }
}

fn join(toks: &[Token]) -> String {
    toks.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join("")
}
