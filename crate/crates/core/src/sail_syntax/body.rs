//! Token-wise harvesting of facts from function bodies.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use super::lexer::{Token, TokenKind};
use super::{BodyFacts, CallSite, Conditional, OpaqueSpan};
use crate::state::StateRef;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RegisterShape {
    pub fields: BTreeSet<String>,
    pub bank: bool,
}

/// Register names known to the body analysis, with their bitfield fields.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RegisterIndex {
    shapes: BTreeMap<String, RegisterShape>,
}

impl RegisterIndex {
    pub fn insert(&mut self, name: &str, shape: RegisterShape) {
        self.shapes.insert(name.to_string(), shape);
    }

    pub fn get(&self, name: &str) -> Option<&RegisterShape> {
        self.shapes.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.shapes.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }
}

const OPAQUE_KEYWORDS: &[&str] = &[
    "cast",
    "catch",
    "constraint",
    "impl",
    "instantiation",
    "monadic",
    "mutual",
    "newtype",
    "repeat",
    "sizeof",
    "termination_measure",
    "throw",
    "try",
    "until",
];

const TYPE_CONSTRUCTORS: &[&str] = &["atom", "bits", "implicit", "int", "range", "vector"];

pub fn analyze_body(tokens: &[Token], index: &RegisterIndex) -> BodyFacts {
    let mut facts = BodyFacts::default();
    for i in 0..tokens.len() {
        let tok = &tokens[i];
        match tok.kind {
            TokenKind::Identifier => {
                if let Some(call) = call_at(tokens, i) {
                    facts.calls.push(call);
                } else if let Some((state, write)) = access_at(tokens, i, index) {
                    if write {
                        facts.writes.insert(state);
                    } else {
                        facts.reads.insert(state);
                    }
                }
            }
            TokenKind::Keyword if tok.text == "if" => {
                if let Some(cond) = conditional_at(tokens, i) {
                    facts.conditionals.push(cond);
                }
            }
            TokenKind::Keyword if OPAQUE_KEYWORDS.contains(&tok.text.as_str()) => {
                facts.opaque.push(OpaqueSpan {
                    location: tok.location.clone(),
                    tokens: 1,
                    reason: format!("unsupported construct `{}`", tok.text),
                });
            }
            _ => {}
        }
    }
    facts
}

fn call_at(tokens: &[Token], i: usize) -> Option<CallSite> {
    if !tokens.get(i + 1).is_some_and(|t| t.is_punct("(")) {
        return None;
    }
    if i > 0 && tokens[i - 1].is_punct(".") || TYPE_CONSTRUCTORS.contains(&tokens[i].text.as_str()) {
        return None;
    }
    let close = matching(tokens, i + 1)?;
    let assigned = tokens.get(close + 1).is_some_and(|t| t.is_op("="));
    Some(CallSite {
        name: tokens[i].text.clone(),
        at: i,
        args: i + 2..close,
        assigned,
    })
}

fn access_at(tokens: &[Token], i: usize, index: &RegisterIndex) -> Option<(StateRef, bool)> {
    let name = &tokens[i].text;
    let shape = index.get(name)?;
    if i > 0 {
        let prev = &tokens[i - 1];
        if prev.is_punct(".") || prev.is_keyword("let") || prev.is_keyword("var") {
            return None;
        }
    }
    let mut state = StateRef::whole(name);
    let mut j = i + 1;
    let at = |k: usize| tokens.get(k);
    if at(j).is_some_and(|t| t.is_punct("["))
        && at(j + 1).is_some_and(|t| t.is_ident() && shape.fields.contains(&t.text))
        && at(j + 2).is_some_and(|t| t.is_punct("]"))
    {
        state = StateRef::field(name, &tokens[j + 1].text);
        j += 3;
    } else if at(j).is_some_and(|t| t.is_punct(".")) && at(j + 1).is_some_and(|t| t.is_ident()) {
        let member = &tokens[j + 1].text;
        if shape.fields.contains(member) {
            state = StateRef::field(name, member);
        }
        j += 2;
    }
    let write = at(j).is_some_and(|t| t.is_op("="));
    Some((state, write))
}

/// Index of the bracket closing the one opened at `open`.
pub(crate) fn matching(tokens: &[Token], open: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (k, t) in tokens.iter().enumerate().skip(open) {
        match bracket(t) {
            1 => depth += 1,
            -1 => {
                depth -= 1;
                if depth == 0 {
                    return Some(k);
                }
                if depth < 0 {
                    return None;
                }
            }
            _ => {}
        }
    }
    None
}

pub(crate) fn bracket(t: &Token) -> i32 {
    if t.kind != TokenKind::Punctuation {
        return 0;
    }
    match t.text.as_str() {
        "(" | "[" | "{" => 1,
        ")" | "]" | "}" => -1,
        _ => 0,
    }
}

fn conditional_at(tokens: &[Token], k: usize) -> Option<Conditional> {
    let then_idx = scan_depth0(tokens, k + 1, |t| t.is_keyword("then"))?;
    let then_arm = arm(tokens, then_idx + 1, true)?;
    let else_arm = if tokens.get(then_arm.end).is_some_and(|t| t.is_keyword("else")) {
        let s = then_arm.end + 1;
        if tokens.get(s).is_some_and(|t| t.is_keyword("if")) {
            let inner = conditional_at(tokens, s)?;
            Some(s..inner.end())
        } else {
            Some(arm(tokens, s, false)?)
        }
    } else {
        None
    };
    Some(Conditional {
        at: k,
        condition: k + 1..then_idx,
        then_arm,
        else_arm,
    })
}

fn scan_depth0(tokens: &[Token], from: usize, stop: impl Fn(&Token) -> bool) -> Option<usize> {
    let mut depth = 0i32;
    for (k, t) in tokens.iter().enumerate().skip(from) {
        if depth == 0 && stop(t) {
            return Some(k);
        }
        depth += bracket(t);
        if depth < 0 {
            return None;
        }
    }
    None
}

/// Extent of a branch starting at `s`: a block, or an expression running
/// to the next separator at the same nesting depth.
fn arm(tokens: &[Token], s: usize, stop_at_else: bool) -> Option<Range<usize>> {
    let first = tokens.get(s)?;
    if first.is_punct("{") {
        let close = matching(tokens, s)?;
        return Some(s..close + 1);
    }
    if first.is_keyword("if") {
        let inner = conditional_at(tokens, s)?;
        return Some(s..inner.end());
    }
    let mut depth = 0i32;
    let mut k = s;
    while k < tokens.len() {
        let t = &tokens[k];
        if depth == 0
            && ((stop_at_else && t.is_keyword("else")) || t.is_punct(";") || t.is_punct(",") || t.is_keyword("in"))
        {
            break;
        }
        depth += bracket(t);
        if depth < 0 {
            break;
        }
        k += 1;
    }
    Some(s..k)
}
