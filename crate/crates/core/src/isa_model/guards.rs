//! Privilege-guard detection.
//!
//! A guard is an `if` whose condition mentions the privilege register and
//! one of whose arms directly calls a trap function. The condition is
//! evaluated per mode in three-valued logic; atoms not about the privilege
//! register are unknown. Alternatives (arms of one conditional, clauses of
//! one function) combine by union; sequential code (successive guards,
//! calls into guarded callees) combines by intersection.

use std::collections::BTreeMap;
use std::ops::Range;

use crate::sail_syntax::{BodyFacts, Conditional, SailModel, Token, TokenKind};

use super::{BackendConfig, IsaError, ModeSet, PrivilegeMode};

pub fn instruction_privileges(
    model: &SailModel,
    config: &BackendConfig,
    instruction: &str,
) -> Result<ModeSet, IsaError> {
    let clause = model
        .execute_clauses
        .get(instruction)
        .ok_or_else(|| IsaError::UnknownInstruction(instruction.to_string()))?;
    let mut g = Guards {
        model,
        config,
        memo: BTreeMap::new(),
    };
    Ok(g.region(&clause.body, &clause.facts, 0..clause.body.len()))
}

struct Guards<'a> {
    model: &'a SailModel,
    config: &'a BackendConfig,
    /// `None` marks a function under evaluation.
    memo: BTreeMap<String, Option<ModeSet>>,
}

impl Guards<'_> {
    fn all(&self) -> ModeSet {
        self.config.modes.iter().cloned().collect()
    }

    fn function(&mut self, name: &str) -> ModeSet {
        match self.memo.get(name) {
            Some(Some(done)) => return done.clone(),
            Some(None) => return self.all(),
            None => {}
        }
        let Some(f) = self.model.functions.get(name) else {
            return self.all();
        };
        self.memo.insert(name.to_string(), None);
        let mut modes = ModeSet::new();
        for c in &f.clauses {
            modes.extend(self.region(&c.body, &c.facts, 0..c.body.len()));
        }
        if f.clauses.is_empty() {
            modes = self.all();
        }
        self.memo.insert(name.to_string(), Some(modes.clone()));
        modes
    }

    /// Modes admitted by the code in `range`.
    fn region(&mut self, toks: &[Token], facts: &BodyFacts, range: Range<usize>) -> ModeSet {
        let mut result = self.all();
        let mut covered_until = range.start;
        let mut tops: Vec<&Conditional> = Vec::new();
        for c in &facts.conditionals {
            if c.at >= covered_until && c.at < range.end {
                tops.push(c);
                covered_until = c.end();
            }
        }
        for c in &tops {
            let modes = self.conditional(toks, facts, c);
            result = &result & &modes;
        }
        let inside = |at: usize| tops.iter().any(|c| at >= c.at && at < c.end());
        for call in &facts.calls {
            if !range.contains(&call.at) || inside(call.at) {
                continue;
            }
            if self.config.is_trap_function(&call.name) || !self.model.functions.contains_key(&call.name) {
                continue;
            }
            let modes = self.function(&call.name);
            result = &result & &modes;
        }
        result
    }

    fn conditional(&mut self, toks: &[Token], facts: &BodyFacts, c: &Conditional) -> ModeSet {
        let cond = &toks[c.condition.clone()];
        let is_guard = cond
            .iter()
            .any(|t| t.is_ident() && t.text == self.config.privilege_register)
            && (self.traps(toks, facts, &c.then_arm)
                || c.else_arm.as_ref().is_some_and(|e| self.traps(toks, facts, e)));
        if !is_guard {
            let mut modes = self.region(toks, facts, c.then_arm.clone());
            match &c.else_arm {
                Some(e) => modes.extend(self.region(toks, facts, e.clone())),
                None => modes = self.all(),
            }
            return modes;
        }
        let verdicts: Vec<(PrivilegeMode, Tri)> = self
            .config
            .modes
            .iter()
            .map(|m| (m.clone(), eval_condition(cond, self.config, m)))
            .collect();
        let when = |want: bool| -> ModeSet {
            verdicts
                .iter()
                .filter(|(_, v)| *v == Tri::Unknown || *v == Tri::from(want))
                .map(|(m, _)| m.clone())
                .collect()
        };
        let mut modes = ModeSet::new();
        if !self.traps(toks, facts, &c.then_arm) {
            let inner = self.region(toks, facts, c.then_arm.clone());
            modes.extend(&when(true) & &inner);
        }
        match &c.else_arm {
            Some(e) if self.traps(toks, facts, e) => {}
            Some(e) => {
                let inner = self.region(toks, facts, e.clone());
                modes.extend(&when(false) & &inner);
            }
            None => modes.extend(when(false)),
        }
        modes
    }

    /// The arm calls a trap function outside any nested conditional.
    fn traps(&self, _toks: &[Token], facts: &BodyFacts, arm: &Range<usize>) -> bool {
        let nested: Vec<&Conditional> = facts.conditionals.iter().filter(|c| arm.contains(&c.at)).collect();
        facts.calls.iter().any(|call| {
            arm.contains(&call.at)
                && self.config.is_trap_function(&call.name)
                && !nested.iter().any(|c| call.at >= c.at && call.at < c.end())
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Tri {
    True,
    False,
    Unknown,
}

impl From<bool> for Tri {
    fn from(b: bool) -> Self {
        if b {
            Tri::True
        } else {
            Tri::False
        }
    }
}

impl Tri {
    fn not(self) -> Tri {
        match self {
            Tri::True => Tri::False,
            Tri::False => Tri::True,
            Tri::Unknown => Tri::Unknown,
        }
    }

    fn and(self, o: Tri) -> Tri {
        match (self, o) {
            (Tri::False, _) | (_, Tri::False) => Tri::False,
            (Tri::True, Tri::True) => Tri::True,
            _ => Tri::Unknown,
        }
    }

    fn or(self, o: Tri) -> Tri {
        self.not().and(o.not()).not()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Value {
    Priv,
    Literal(String),
    Bool(Tri),
    Other,
}

impl Value {
    fn truth(&self) -> Tri {
        match self {
            Value::Bool(t) => *t,
            _ => Tri::Unknown,
        }
    }
}

/// Evaluates a condition for one mode.
pub(crate) fn eval_condition(toks: &[Token], config: &BackendConfig, mode: &PrivilegeMode) -> Tri {
    let mut p = CondParser {
        toks,
        pos: 0,
        config,
        mode,
    };
    let v = p.or_expr();
    if p.pos != toks.len() {
        return Tri::Unknown;
    }
    v.truth()
}

struct CondParser<'a> {
    toks: &'a [Token],
    pos: usize,
    config: &'a BackendConfig,
    mode: &'a PrivilegeMode,
}

impl CondParser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, pred: impl Fn(&Token) -> bool) -> bool {
        if self.peek().is_some_and(pred) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn or_expr(&mut self) -> Value {
        let mut v = self.and_expr();
        while self.eat(|t| t.is_op("|") || t.is_op("||") || t.is_keyword("or")) {
            let r = self.and_expr();
            v = Value::Bool(v.truth().or(r.truth()));
        }
        v
    }

    fn and_expr(&mut self) -> Value {
        let mut v = self.not_expr();
        while self.eat(|t| t.is_op("&") || t.is_op("&&") || t.is_keyword("and")) {
            let r = self.not_expr();
            v = Value::Bool(v.truth().and(r.truth()));
        }
        v
    }

    fn not_expr(&mut self) -> Value {
        if self.eat(|t| t.is_op("~") || t.is_op("!")) {
            return Value::Bool(self.not_expr().truth().not());
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Value {
        let lhs = self.operand();
        const OPS: &[&str] = &["==", "!=", "<", "<=", ">", ">="];
        let Some(op) = self
            .peek()
            .filter(|t| t.kind == TokenKind::Operator && OPS.contains(&t.text.as_str()))
            .map(|t| t.text.clone())
        else {
            return lhs;
        };
        self.pos += 1;
        let rhs = self.operand();
        Value::Bool(self.compare(&lhs, &op, &rhs))
    }

    fn compare(&self, lhs: &Value, op: &str, rhs: &Value) -> Tri {
        let (lit, op) = match (lhs, rhs) {
            (Value::Priv, Value::Literal(l)) => (l, op.to_string()),
            (Value::Literal(l), Value::Priv) => (l, flip(op).to_string()),
            _ => return Tri::Unknown,
        };
        let mode_lit = self.config.literal_of(self.mode);
        let Some(lit_level) = self.config.literal_level(lit) else {
            return Tri::Unknown;
        };
        let level = self.mode.level();
        Tri::from(match op.as_str() {
            "==" => mode_lit == lit,
            "!=" => mode_lit != lit,
            "<" => level < lit_level,
            "<=" => level <= lit_level || mode_lit == lit,
            ">" => level > lit_level && mode_lit != lit,
            ">=" => level >= lit_level,
            _ => return Tri::Unknown,
        })
    }

    fn operand(&mut self) -> Value {
        let Some(t) = self.peek().cloned() else {
            return Value::Other;
        };
        if t.is_punct("(") {
            self.pos += 1;
            let v = self.or_expr();
            self.eat(|t| t.is_punct(")"));
            return v;
        }
        self.pos += 1;
        if t.is_ident() && t.text == "not" && self.peek().is_some_and(|n| n.is_punct("(")) {
            self.pos += 1;
            let v = self.or_expr();
            self.eat(|t| t.is_punct(")"));
            return Value::Bool(v.truth().not());
        }
        let mut plain = true;
        while self
            .peek()
            .is_some_and(|n| n.is_punct("(") || n.is_punct("[") || n.is_punct("."))
        {
            plain = false;
            self.skip_group();
        }
        match t.kind {
            TokenKind::Identifier if plain && t.text == self.config.privilege_register => Value::Priv,
            TokenKind::Identifier if plain && self.config.literal_level(&t.text).is_some() => Value::Literal(t.text),
            TokenKind::Literal if t.text == "true" => Value::Bool(Tri::True),
            TokenKind::Literal if t.text == "false" => Value::Bool(Tri::False),
            _ => Value::Other,
        }
    }

    fn skip_group(&mut self) {
        if self.eat(|t| t.is_punct(".")) {
            self.pos += 1;
            return;
        }
        let mut depth = 0i32;
        while let Some(t) = self.peek() {
            let b = match t.text.as_str() {
                "(" | "[" if t.kind == TokenKind::Punctuation => 1,
                ")" | "]" if t.kind == TokenKind::Punctuation => -1,
                _ => 0,
            };
            depth += b;
            self.pos += 1;
            if depth <= 0 {
                break;
            }
        }
    }
}

fn flip(op: &str) -> &str {
    match op {
        "<" => ">",
        "<=" => ">=",
        ">" => "<",
        ">=" => "<=",
        other => other,
    }
}
