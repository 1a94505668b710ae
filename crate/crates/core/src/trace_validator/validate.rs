use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use serde::Serialize;

use super::TraceFootprint;
use crate::footprint::InstructionInsight;
use crate::state::{Direction, StateRef};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationStatus {
    Validated,
    SupersetViolation,
    MissingTrace,
}

impl ValidationStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ValidationStatus::Validated => "validated",
            ValidationStatus::SupersetViolation => "superset_violation",
            ValidationStatus::MissingTrace => "missing_trace",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct MissingEntry {
    pub state: StateRef,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InstructionValidation {
    pub instruction: String,
    pub status: ValidationStatus,
    pub traces: usize,
    pub missing: Vec<MissingEntry>,
    pub unknown_registers: BTreeSet<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationSummary {
    pub validated: usize,
    pub superset_violation: usize,
    pub missing_trace: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub summary: ValidationSummary,
    pub entries: Vec<InstructionValidation>,
    /// Trace keys that match no instruction in the corpus.
    pub unmatched_traces: Vec<String>,
}

impl ValidationReport {
    pub fn has_violations(&self) -> bool {
        self.summary.superset_violation > 0
    }

    pub fn get(&self, instruction: &str) -> Option<&InstructionValidation> {
        self.entries.iter().find(|e| e.instruction == instruction)
    }

    pub fn violations(&self) -> impl Iterator<Item = &InstructionValidation> {
        self.entries
            .iter()
            .filter(|e| e.status == ValidationStatus::SupersetViolation)
    }
}

/// Whole-register entries cover their fields; a whole-register trace event
/// is covered by any tracked field of that register.
fn covered(scanner: &BTreeSet<&StateRef>, s: &StateRef) -> bool {
    if scanner.contains(s) {
        return true;
    }
    if s.is_whole() {
        scanner.iter().any(|x| x.register == s.register)
    } else {
        scanner.contains(&s.parent())
    }
}

pub fn validate(insights: &[InstructionInsight], traces: &BTreeMap<String, TraceFootprint>) -> ValidationReport {
    let mut entries = Vec::new();
    let mut summary = ValidationSummary::default();
    for ins in insights {
        let Some(tf) = traces.get(&ins.instruction).filter(|t| t.traces > 0) else {
            summary.missing_trace += 1;
            entries.push(InstructionValidation {
                instruction: ins.instruction.clone(),
                status: ValidationStatus::MissingTrace,
                traces: 0,
                missing: Vec::new(),
                unknown_registers: BTreeSet::new(),
            });
            continue;
        };
        let mut missing = Vec::new();
        for (direction, required) in [(Direction::Read, &tf.reads), (Direction::Write, &tf.writes)] {
            let have = ins.footprint.states(direction);
            for s in required {
                if !covered(&have, s) {
                    missing.push(MissingEntry {
                        state: s.clone(),
                        direction,
                    });
                }
            }
        }
        let status = if missing.is_empty() {
            summary.validated += 1;
            ValidationStatus::Validated
        } else {
            summary.superset_violation += 1;
            ValidationStatus::SupersetViolation
        };
        entries.push(InstructionValidation {
            instruction: ins.instruction.clone(),
            status,
            traces: tf.traces,
            missing,
            unknown_registers: tf.unknown.clone(),
        });
    }
    let known: BTreeSet<&str> = insights.iter().map(|i| i.instruction.as_str()).collect();
    let unmatched_traces = traces.keys().filter(|k| !known.contains(k.as_str())).cloned().collect();
    ValidationReport {
        summary,
        entries,
        unmatched_traces,
    }
}

pub fn write_validation_json<W: Write>(report: &ValidationReport, out: W) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(out, report)
}

pub fn write_validation_text<W: Write>(report: &ValidationReport, mut out: W) -> io::Result<()> {
    let s = &report.summary;
    writeln!(
        out,
        "validated: {}  superset_violation: {}  missing_trace: {}",
        s.validated, s.superset_violation, s.missing_trace
    )?;
    for e in &report.entries {
        writeln!(
            out,
            "{:<14} {:<18} traces={}",
            e.instruction,
            e.status.as_str(),
            e.traces
        )?;
        for m in &e.missing {
            writeln!(out, "    missing {} {}", m.direction, m.state)?;
        }
        if !e.unknown_registers.is_empty() {
            let names: Vec<&str> = e.unknown_registers.iter().map(String::as_str).collect();
            writeln!(out, "    unknown registers: {}", names.join(", "))?;
        }
    }
    for t in &report.unmatched_traces {
        writeln!(out, "unmatched trace key: {t}")?;
    }
    Ok(())
}
