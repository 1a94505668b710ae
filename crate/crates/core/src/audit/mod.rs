//! Audits a context-switch implementation's declared swap behaviour
//! against a sensitivity report.
//!
//! Manifest format, one state per line:
//!
//! ```text
//! @pair Supervisor, Supervisor
//! # register[.field], action[, provenance]
//! sepc, swap, sm/src/enclave.c:212
//! f0..f31, swap_conditional
//! ```
//!
//! Actions are `swap`, `swap_conditional`, `clear` and `none`. States not
//! listed count as `none`; a field without its own line takes its
//! register's action.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::classifier::{AttackClass, SensitivityReport};
use crate::isa_model::{BackendConfig, PrivilegeMode};
use crate::state::StateRef;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuditError {
    #[error("manifest line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("manifest line {line}: unknown action `{action}`")]
    UnknownAction { line: usize, action: String },
    #[error("manifest line {line}: unknown privilege mode `{mode}`")]
    UnknownMode { line: usize, mode: String },
    #[error("manifest is for {manifest} but the report is for {report}")]
    PairMismatch { manifest: String, report: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapAction {
    Swap,
    SwapConditional,
    Clear,
    None,
}

impl SwapAction {
    pub fn parse(text: &str) -> Option<Self> {
        Some(match text {
            "swap" => SwapAction::Swap,
            "swap_conditional" => SwapAction::SwapConditional,
            "clear" => SwapAction::Clear,
            "none" => SwapAction::None,
            _ => return None,
        })
    }
}

impl fmt::Display for SwapAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SwapAction::Swap => "swap",
            SwapAction::SwapConditional => "swap_conditional",
            SwapAction::Clear => "clear",
            SwapAction::None => "none",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SwapEntry {
    pub action: SwapAction,
    pub provenance: Option<String>,
    pub line: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SwapManifest {
    pub pair: Option<(PrivilegeMode, PrivilegeMode)>,
    pub entries: BTreeMap<StateRef, SwapEntry>,
    /// Listed states the corpus does not declare.
    pub unknown: BTreeSet<StateRef>,
}

impl SwapManifest {
    /// The entry for `state`, falling back to its register's entry; the
    /// flag is set when the entry was inherited.
    pub fn entry_of(&self, state: &StateRef) -> Option<(&SwapEntry, bool)> {
        if let Some(e) = self.entries.get(state) {
            return Some((e, false));
        }
        if state.is_whole() {
            return None;
        }
        self.entries.get(&state.parent()).map(|e| (e, true))
    }
}

/// `f0..f31` style ranges; anything else is a single state.
fn expand_range(text: &str) -> Option<Vec<String>> {
    let Some((lo, hi)) = text.split_once("..") else {
        return Some(vec![text.to_string()]);
    };
    let split = |s: &str| {
        let digits = s.len() - s.bytes().rev().take_while(u8::is_ascii_digit).count();
        let (p, n) = s.split_at(digits);
        Some((p.to_string(), n.parse::<u32>().ok()?))
    };
    let (p1, a) = split(lo)?;
    let (p2, b) = split(hi)?;
    if p1 != p2 || p1.is_empty() || a > b {
        return None;
    }
    Some((a..=b).map(|i| format!("{p1}{i}")).collect())
}

pub fn parse_manifest(
    text: &str,
    config: &BackendConfig,
    known: &BTreeSet<StateRef>,
) -> Result<SwapManifest, AuditError> {
    let mut m = SwapManifest::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let malformed = |message: &str| AuditError::MalformedLine {
            line,
            message: message.to_string(),
        };
        if let Some(rest) = t.strip_prefix("@pair") {
            let modes: Vec<&str> = rest.split(',').map(str::trim).collect();
            if modes.len() != 2 || modes.iter().any(|s| s.is_empty()) {
                return Err(malformed("expected `@pair <source>, <target>`"));
            }
            let resolve = |name: &str| {
                config.mode(name).ok_or_else(|| AuditError::UnknownMode {
                    line,
                    mode: name.to_string(),
                })
            };
            m.pair = Some((resolve(modes[0])?, resolve(modes[1])?));
            continue;
        }
        let cols: Vec<&str> = t.splitn(3, ',').map(str::trim).collect();
        if cols.len() < 2 || cols[0].is_empty() {
            return Err(malformed("expected `register[.field], action[, provenance]`"));
        }
        let action = SwapAction::parse(cols[1]).ok_or_else(|| AuditError::UnknownAction {
            line,
            action: cols[1].to_string(),
        })?;
        let provenance = cols.get(2).filter(|p| !p.is_empty()).map(|p| p.to_string());
        let names = expand_range(cols[0]).ok_or_else(|| malformed("bad range"))?;
        for name in names {
            let state = StateRef::parse(&name).ok_or_else(|| malformed("bad state name"))?;
            if !known.contains(&state) {
                m.unknown.insert(state.clone());
            }
            let entry = SwapEntry {
                action,
                provenance: provenance.clone(),
                line,
            };
            if let Some(prev) = m.entries.insert(state.clone(), entry) {
                return Err(malformed(&format!("`{state}` already listed on line {}", prev.line)));
            }
        }
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Ok,
    MishandledNotSwapped,
    TimingChannelConditional,
    RedundantSwap,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Ok => "ok",
            Verdict::MishandledNotSwapped => "mishandled_not_swapped",
            Verdict::TimingChannelConditional => "timing_channel_conditional",
            Verdict::RedundantSwap => "redundant_swap",
        })
    }
}

pub fn verdict(sensitive: bool, action: SwapAction) -> Verdict {
    match (sensitive, action) {
        (true, SwapAction::None) => Verdict::MishandledNotSwapped,
        (true, SwapAction::SwapConditional) => Verdict::TimingChannelConditional,
        (true, _) => Verdict::Ok,
        (false, SwapAction::None) => Verdict::Ok,
        (false, _) => Verdict::RedundantSwap,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditFinding {
    pub state: StateRef,
    pub action: SwapAction,
    pub verdict: Verdict,
    pub sensitive: bool,
    pub classes: BTreeSet<AttackClass>,
    pub provenance: Option<String>,
    /// Set when a field takes its register's entry. A non-sensitive field
    /// handled this way counts as `none`; the register carries the verdict.
    pub inherited_from: Option<StateRef>,
    /// False for manifest states missing from the report.
    pub in_report: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub source: PrivilegeMode,
    pub target: PrivilegeMode,
    pub summary: BTreeMap<Verdict, usize>,
    pub by_class: BTreeMap<Verdict, BTreeMap<AttackClass, usize>>,
    pub findings: Vec<AuditFinding>,
    pub unknown_states: BTreeSet<StateRef>,
}

impl AuditReport {
    pub fn with_verdict(&self, v: Verdict) -> impl Iterator<Item = &AuditFinding> {
        self.findings.iter().filter(move |f| f.verdict == v)
    }

    pub fn count(&self, v: Verdict) -> usize {
        self.summary.get(&v).copied().unwrap_or(0)
    }

    pub fn get(&self, state: &StateRef) -> Option<&AuditFinding> {
        self.findings.iter().find(|f| &f.state == state)
    }
}

pub fn audit(manifest: &SwapManifest, report: &SensitivityReport) -> Result<AuditReport, AuditError> {
    if let Some((s, t)) = &manifest.pair {
        if s != &report.source || t != &report.target {
            return Err(AuditError::PairMismatch {
                manifest: format!("({s}, {t})"),
                report: format!("({}, {})", report.source, report.target),
            });
        }
    }
    let mut findings = Vec::new();
    for e in &report.entries {
        let entry = manifest.entry_of(&e.state);
        let inherited = entry.is_some_and(|(_, inh)| inh);
        let action = match entry {
            Some((x, _)) if e.sensitive || !inherited => x.action,
            _ => SwapAction::None,
        };
        findings.push(AuditFinding {
            state: e.state.clone(),
            action,
            verdict: verdict(e.sensitive, action),
            sensitive: e.sensitive,
            classes: e.classes.clone(),
            provenance: entry.and_then(|(x, _)| x.provenance.clone()),
            inherited_from: inherited.then(|| e.state.parent()),
            in_report: true,
        });
    }
    for (state, entry) in &manifest.entries {
        if report.get(state).is_none() {
            findings.push(AuditFinding {
                state: state.clone(),
                action: entry.action,
                verdict: verdict(false, entry.action),
                sensitive: false,
                classes: BTreeSet::new(),
                provenance: entry.provenance.clone(),
                inherited_from: None,
                in_report: false,
            });
        }
    }
    let mut summary: BTreeMap<Verdict, usize> = BTreeMap::new();
    let mut by_class: BTreeMap<Verdict, BTreeMap<AttackClass, usize>> = BTreeMap::new();
    for f in &findings {
        *summary.entry(f.verdict).or_default() += 1;
        for c in &f.classes {
            *by_class.entry(f.verdict).or_default().entry(*c).or_default() += 1;
        }
    }
    Ok(AuditReport {
        source: report.source.clone(),
        target: report.target.clone(),
        summary,
        by_class,
        findings,
        unknown_states: manifest.unknown.clone(),
    })
}

pub fn write_audit_json<W: Write>(report: &AuditReport, out: W) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(out, report)
}

/// Findings other than `ok`, one row per state, followed by the summary.
pub fn write_audit_text<W: Write>(report: &AuditReport, mut out: W) -> io::Result<()> {
    writeln!(out, "source: {}  target: {}", report.source, report.target)?;
    writeln!(out, "{:<22} {:<18} {:<28} classes", "ISA-state", "action", "verdict")?;
    for f in report.findings.iter().filter(|f| f.verdict != Verdict::Ok) {
        let classes: Vec<String> = f.classes.iter().map(|c| c.to_string()).collect();
        writeln!(
            out,
            "{:<22} {:<18} {:<28} {}",
            f.state.to_string(),
            f.action.to_string(),
            f.verdict.to_string(),
            classes.join(", ")
        )?;
    }
    writeln!(out)?;
    for (v, n) in &report.summary {
        writeln!(out, "{v}: {n}")?;
    }
    for s in &report.unknown_states {
        writeln!(out, "unknown state in manifest: {s}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
