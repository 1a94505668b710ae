//! Checks scanner footprints against register events recorded in
//! SMT-LIB2 instruction traces.
//!
//! A manifest maps each trace file to an instruction (or a group of
//! instructions sharing one execute clause) and the mode it ran in:
//!
//! ```text
//! # trace_file, instruction_or_group, group_flag, mode_context
//! mret_m.smt2, MRET, single, Machine
//! fadd.smt2, F_BIN_TYPE, group, User
//! ```
//!
//! For grouped entries the member name is the trace file stem.

pub mod sexpr;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::state::StateRef;

pub use validate::{
    validate, write_validation_json, write_validation_text, InstructionValidation, MissingEntry, ValidationReport,
    ValidationStatus, ValidationSummary,
};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}:{line}: malformed S-expression: {message}")]
    MalformedSExpression { path: String, line: usize, message: String },
    #[error("trace `{0}` has no manifest entry")]
    MissingManifestEntry(String),
    #[error("manifest line {line}: {message}")]
    MalformedManifestLine { line: usize, message: String },
    #[error("bundles mix `{expected}` and `{found}`")]
    MixedGroup { expected: String, found: String },
    #[error("no trace bundles given")]
    NoBundles,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    ReadReg,
    WriteReg,
    Other,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub kind: EventKind,
    /// Empty for `Other` events.
    pub register: String,
    pub field_path: Option<Vec<String>>,
    /// First and last source line of the S-expression.
    pub lines: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceBundle {
    pub instruction: String,
    pub group: Option<String>,
    pub mode_context: Option<String>,
    pub events: Vec<TraceEvent>,
    pub source_path: String,
}

impl TraceBundle {
    /// The instruction or group name the bundle is validated under.
    pub fn key(&self) -> &str {
        self.group.as_deref().unwrap_or(&self.instruction)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub trace_file: String,
    pub name: String,
    pub group: bool,
    pub mode_context: Option<String>,
}

pub fn parse_trace_manifest(text: &str) -> Result<Vec<ManifestEntry>, TraceError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: &str| TraceError::MalformedManifestLine {
            line: i + 1,
            message: message.to_string(),
        };
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols.len() > 4 || cols[0].is_empty() || cols[1].is_empty() {
            return Err(bad(
                "expected `trace_file, instruction_or_group[, group_flag[, mode_context]]`",
            ));
        }
        let group = match cols.get(2).copied().unwrap_or("") {
            "group" | "true" | "yes" | "1" => true,
            "" | "single" | "false" | "no" | "0" => false,
            _ => return Err(bad("group_flag must be `group` or `single`")),
        };
        let mode_context = cols
            .get(3)
            .filter(|m| !m.is_empty() && **m != "-")
            .map(|m| m.to_string());
        out.push(ManifestEntry {
            trace_file: cols[0].to_string(),
            name: cols[1].to_string(),
            group,
            mode_context,
        });
    }
    Ok(out)
}

fn file_name(path: &str) -> &str {
    Path::new(path).file_name().and_then(|n| n.to_str()).unwrap_or(path)
}

/// Parses one trace. The manifest entry is found by file name.
pub fn parse_trace(text: &str, path: &str, manifest: &[ManifestEntry]) -> Result<TraceBundle, TraceError> {
    let entry = manifest
        .iter()
        .find(|e| e.trace_file == path || file_name(&e.trace_file) == file_name(path))
        .ok_or_else(|| TraceError::MissingManifestEntry(path.to_string()))?;
    let forms = sexpr::parse_all(text).map_err(|e| TraceError::MalformedSExpression {
        path: path.to_string(),
        line: e.line,
        message: e.message,
    })?;
    let mut events = Vec::new();
    for f in &forms {
        collect_events(f, path, &mut events)?;
    }
    let (instruction, group) = if entry.group {
        let stem = Path::new(path)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(path)
            .to_string();
        (stem, Some(entry.name.clone()))
    } else {
        (entry.name.clone(), None)
    };
    Ok(TraceBundle {
        instruction,
        group,
        mode_context: entry.mode_context.clone(),
        events,
        source_path: path.to_string(),
    })
}

fn collect_events(form: &sexpr::SExpr, path: &str, out: &mut Vec<TraceEvent>) -> Result<(), TraceError> {
    let lines = (form.line(), form.end_line());
    let kind = match form.head() {
        Some("trace" | "events") => {
            for child in &form.items().expect("has a head")[1..] {
                collect_events(child, path, out)?;
            }
            return Ok(());
        }
        Some("read-reg") => EventKind::ReadReg,
        Some("write-reg") => EventKind::WriteReg,
        _ => {
            out.push(TraceEvent {
                kind: EventKind::Other,
                register: String::new(),
                field_path: None,
                lines,
            });
            return Ok(());
        }
    };
    let items = form.items().expect("has a head");
    let register = items
        .get(1)
        .and_then(sexpr::SExpr::atom)
        .filter(|r| !r.is_empty())
        .ok_or_else(|| TraceError::MalformedSExpression {
            path: path.to_string(),
            line: form.line(),
            message: "register event without a register name".into(),
        })?;
    out.push(TraceEvent {
        kind,
        register: register.to_string(),
        field_path: items.get(2).and_then(field_path),
        lines,
    });
    Ok(())
}

/// `nil`, `((_ field |A|) (_ field |B|))` or `(A B)`.
fn field_path(e: &sexpr::SExpr) -> Option<Vec<String>> {
    let items = e.items()?;
    let path: Vec<String> = items
        .iter()
        .filter_map(|acc| match acc {
            sexpr::SExpr::Atom { text, .. } => Some(text.clone()),
            list => match list.items()? {
                [u, k, name] if u.atom() == Some("_") && k.atom() == Some("field") => name.atom().map(String::from),
                _ => None,
            },
        })
        .collect();
    (!path.is_empty()).then_some(path)
}

/// Reads the manifest and every trace it lists; trace paths are relative
/// to the manifest's directory.
pub fn load_traces(manifest_path: &Path) -> Result<Vec<TraceBundle>, TraceError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| TraceError::Io { path, source }
    };
    let text = std::fs::read_to_string(manifest_path).map_err(io(manifest_path))?;
    let manifest = parse_trace_manifest(&text)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for e in &manifest {
        let p = dir.join(&e.trace_file);
        let body = std::fs::read_to_string(&p).map_err(io(&p))?;
        out.push(parse_trace(&body, &e.trace_file, &manifest)?);
    }
    Ok(out)
}

/// Register events of one instruction or group, normalized to states.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TraceFootprint {
    pub reads: BTreeSet<StateRef>,
    pub writes: BTreeSet<StateRef>,
    /// Registers the corpus does not declare; left out of the check.
    pub unknown: BTreeSet<String>,
    pub traces: usize,
}

/// Union over bundles of one instruction or group. A field path keeps its
/// first component when it names a known field, else the whole register.
pub fn trace_footprint(bundles: &[TraceBundle], known: &BTreeSet<StateRef>) -> Result<TraceFootprint, TraceError> {
    let first = bundles.first().ok_or(TraceError::NoBundles)?;
    let mut fp = TraceFootprint::default();
    for b in bundles {
        if b.key() != first.key() {
            return Err(TraceError::MixedGroup {
                expected: first.key().to_string(),
                found: b.key().to_string(),
            });
        }
        fp.traces += 1;
        for ev in &b.events {
            let set = match ev.kind {
                EventKind::ReadReg => &mut fp.reads,
                EventKind::WriteReg => &mut fp.writes,
                EventKind::Other => continue,
            };
            let whole = StateRef::whole(&ev.register);
            if !known.contains(&whole) {
                fp.unknown.insert(ev.register.clone());
                continue;
            }
            let state = ev
                .field_path
                .as_ref()
                .and_then(|p| p.first())
                .map(|f| StateRef::field(&ev.register, f))
                .filter(|s| known.contains(s))
                .unwrap_or(whole);
            set.insert(state);
        }
    }
    Ok(fp)
}

/// Groups bundles by instruction or group name and unions each group.
pub fn footprints_by_key(
    bundles: &[TraceBundle],
    known: &BTreeSet<StateRef>,
) -> Result<BTreeMap<String, TraceFootprint>, TraceError> {
    let mut groups: BTreeMap<&str, Vec<TraceBundle>> = BTreeMap::new();
    for b in bundles {
        groups.entry(b.key()).or_default().push(b.clone());
    }
    groups
        .into_iter()
        .map(|(k, bs)| Ok((k.to_string(), trace_footprint(&bs, known)?)))
        .collect()
}

#[cfg(test)]
mod tests;
