//! Security-sensitivity classification for a (source, target) mode pair.
//!
//! With `W_s` = source can write (explicitly or implicitly), `R_t` = target
//! can read, `D_t` = target execution implicitly reads, `D_s` = source
//! execution implicitly reads:
//!
//! | rule      | condition     | classes                          |
//! |-----------|---------------|----------------------------------|
//! | i         | `W_s ∧ D_t`   | ComputationalIntegrity           |
//! | ii-iii    | `W_s ∧ R_t`   | SideChannel, CovertChannel       |
//! | iv        | `D_s ∧ R_t`   | SideChannel                      |
//!
//! GPRs are sensitive with all three classes regardless.

mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::footprint::{instruction_insights, InstructionInsight};
use crate::isa_model::{ExplicitAccess, Isa, IsaError, PrivilegeMode};
use crate::state::{AccessKind, StateInfo, StateKind, StateRef};

pub use report::{write_sensitivity_csv, write_sensitivity_json, SENSITIVITY_HEADER};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("footprint references undiscovered state `{0}`")]
    UnknownState(String),
    #[error("unknown privilege mode `{0}`")]
    UnknownMode(String),
    #[error(transparent)]
    Isa(#[from] IsaError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AccessFlags {
    pub explicit_read: bool,
    pub explicit_write: bool,
    pub implicit_read: bool,
    pub implicit_write: bool,
    /// The implicit read was inferred from the other granularity
    /// (field from whole register or the reverse).
    pub derived_read: bool,
    pub derived_write: bool,
}

impl AccessFlags {
    pub fn can_write(&self) -> bool {
        self.explicit_write || self.implicit_write
    }

    pub fn can_read(&self) -> bool {
        self.explicit_read || self.implicit_read
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessMatrix {
    modes: Vec<PrivilegeMode>,
    states: Vec<StateInfo>,
    index: BTreeMap<StateRef, usize>,
    cells: BTreeMap<(PrivilegeMode, StateRef), AccessFlags>,
}

impl AccessMatrix {
    /// An all-false matrix over the given modes and states.
    pub fn new(modes: &[PrivilegeMode], states: &[StateInfo]) -> Self {
        AccessMatrix {
            modes: modes.to_vec(),
            states: states.to_vec(),
            index: states.iter().enumerate().map(|(i, s)| (s.state.clone(), i)).collect(),
            cells: BTreeMap::new(),
        }
    }

    pub fn modes(&self) -> &[PrivilegeMode] {
        &self.modes
    }

    pub fn states(&self) -> &[StateInfo] {
        &self.states
    }

    pub fn info(&self, state: &StateRef) -> Option<&StateInfo> {
        self.index.get(state).map(|&i| &self.states[i])
    }

    pub fn get(&self, mode: &PrivilegeMode, state: &StateRef) -> AccessFlags {
        self.cells
            .get(&(mode.clone(), state.clone()))
            .copied()
            .unwrap_or_default()
    }

    pub fn set(&mut self, mode: &PrivilegeMode, state: &StateRef, flags: AccessFlags) {
        self.cells.insert((mode.clone(), state.clone()), flags);
    }

    fn update(&mut self, mode: &PrivilegeMode, state: &StateRef, f: impl FnOnce(&mut AccessFlags)) {
        f(self.cells.entry((mode.clone(), state.clone())).or_default());
    }

    fn fields_of(&self, register: &str) -> Vec<StateRef> {
        self.states
            .iter()
            .filter(|s| s.state.register == register && !s.state.is_whole())
            .map(|s| s.state.clone())
            .collect()
    }
}

/// Builds the matrix from explicit rights and the implicit accesses of the
/// instructions executable in each mode.
pub fn build_access_matrix(
    modes: &[PrivilegeMode],
    states: &[StateInfo],
    insights: &[InstructionInsight],
    explicit: &[ExplicitAccess],
) -> Result<AccessMatrix, ClassifyError> {
    let mut m = AccessMatrix::new(modes, states);
    for e in explicit {
        if m.info(&e.state).is_none() {
            return Err(ClassifyError::UnknownState(e.state.to_string()));
        }
        for mode in modes {
            let a = e.get(mode);
            m.update(mode, &e.state, |f| {
                f.explicit_read |= a.readable;
                f.explicit_write |= a.writable;
            });
        }
    }
    let mut direct: BTreeSet<(PrivilegeMode, StateRef, bool)> = BTreeSet::new();
    for ins in insights {
        for (accesses, write) in [(&ins.footprint.reads, false), (&ins.footprint.writes, true)] {
            for a in accesses.iter().filter(|a| a.kind == AccessKind::Implicit) {
                if m.info(&a.state).is_none() {
                    return Err(ClassifyError::UnknownState(a.state.to_string()));
                }
                for mode in &ins.privileges {
                    direct.insert((mode.clone(), a.state.clone(), write));
                }
            }
        }
    }
    for (mode, state, write) in &direct {
        m.update(mode, state, |f| {
            if *write {
                f.implicit_write = true
            } else {
                f.implicit_read = true
            }
        });
    }
    for (mode, state, write) in &direct {
        let related = if state.is_whole() {
            m.fields_of(&state.register)
        } else {
            vec![state.parent()]
        };
        for r in related {
            if direct.contains(&(mode.clone(), r.clone(), *write)) {
                continue;
            }
            m.update(mode, &r, |f| {
                if *write {
                    f.implicit_write = true;
                    f.derived_write = true;
                } else {
                    f.implicit_read = true;
                    f.derived_read = true;
                }
            });
        }
    }
    Ok(m)
}

/// Insights plus matrix for a whole model.
pub fn analyze(
    isa: &Isa<'_>,
    include_baseline: bool,
) -> Result<(Vec<InstructionInsight>, AccessMatrix), ClassifyError> {
    let insights = instruction_insights(isa.model, isa.config, include_baseline)?;
    let matrix = build_access_matrix(isa.modes(), &isa.states, &insights, &isa.explicit_access_all())?;
    Ok((insights, matrix))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum AttackClass {
    ComputationalIntegrity,
    SideChannel,
    CovertChannel,
}

impl fmt::Display for AttackClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AttackClass::ComputationalIntegrity => "ComputationalIntegrity",
            AttackClass::SideChannel => "SideChannel",
            AttackClass::CovertChannel => "CovertChannel",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RuleFiring {
    pub rule: String,
    pub flags: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Sensitivity {
    pub state: StateRef,
    pub kind: StateKind,
    pub source: PrivilegeMode,
    pub target: PrivilegeMode,
    pub sensitive: bool,
    pub classes: BTreeSet<AttackClass>,
    pub justification: Vec<RuleFiring>,
    /// The swapped pair also yields a side channel.
    pub bidirectional: bool,
}

impl Sensitivity {
    pub fn rules_fired(&self) -> Vec<&str> {
        self.justification.iter().map(|r| r.rule.as_str()).collect()
    }
}

pub fn classify(
    state: &StateRef,
    source: &PrivilegeMode,
    target: &PrivilegeMode,
    matrix: &AccessMatrix,
) -> Result<Sensitivity, ClassifyError> {
    let info = matrix
        .info(state)
        .ok_or_else(|| ClassifyError::UnknownState(state.to_string()))?;
    let s = matrix.get(source, state);
    let t = matrix.get(target, state);
    let mut classes = BTreeSet::new();
    let mut justification = Vec::new();
    if info.kind == StateKind::Gpr {
        classes.extend([
            AttackClass::ComputationalIntegrity,
            AttackClass::SideChannel,
            AttackClass::CovertChannel,
        ]);
        justification.push(RuleFiring {
            rule: "gpr-default".into(),
            flags: "general-purpose register".into(),
        });
    } else {
        let w_s = s.can_write();
        let r_t = t.can_read();
        let d_t = t.implicit_read;
        let d_s = s.implicit_read;
        let ws = || format!("W_s(ew={},iw={})", s.explicit_write as u8, s.implicit_write as u8);
        let rt = || format!("R_t(er={},ir={})", t.explicit_read as u8, t.implicit_read as u8);
        if w_s && d_t {
            classes.insert(AttackClass::ComputationalIntegrity);
            justification.push(RuleFiring {
                rule: "rule-i".into(),
                flags: format!("{} D_t(ir=1)", ws()),
            });
        }
        if w_s && r_t {
            classes.insert(AttackClass::SideChannel);
            classes.insert(AttackClass::CovertChannel);
            justification.push(RuleFiring {
                rule: "rule-ii-iii".into(),
                flags: format!("{} {}", ws(), rt()),
            });
        }
        if d_s && r_t {
            classes.insert(AttackClass::SideChannel);
            justification.push(RuleFiring {
                rule: "rule-iv".into(),
                flags: format!("D_s(ir=1) {}", rt()),
            });
        }
    }
    Ok(Sensitivity {
        state: state.clone(),
        kind: info.kind,
        source: source.clone(),
        target: target.clone(),
        sensitive: !classes.is_empty(),
        classes,
        justification,
        bidirectional: false,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub total_states: usize,
    pub sensitive_states: usize,
    pub registers_total: usize,
    pub registers_sensitive: usize,
    pub fields_total: usize,
    pub fields_sensitive: usize,
    /// Sensitive non-GPR states (CSRs, bitfields and other registers).
    pub non_gpr_sensitive: usize,
    pub by_class: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SensitivityReport {
    pub source: PrivilegeMode,
    pub target: PrivilegeMode,
    pub summary: Summary,
    pub entries: Vec<Sensitivity>,
}

impl SensitivityReport {
    pub fn get(&self, state: &StateRef) -> Option<&Sensitivity> {
        self.entries.iter().find(|e| &e.state == state)
    }

    pub fn sensitive_states(&self) -> impl Iterator<Item = &StateRef> {
        self.entries.iter().filter(|e| e.sensitive).map(|e| &e.state)
    }
}

/// Classifies every state; a whole register is sensitive when any of its
/// fields is.
pub fn classify_all(source: &PrivilegeMode, target: &PrivilegeMode, matrix: &AccessMatrix) -> SensitivityReport {
    let mut entries: Vec<Sensitivity> = matrix
        .states()
        .iter()
        .map(|s| classify(&s.state, source, target, matrix).expect("state is in the matrix"))
        .collect();
    for e in &mut entries {
        if let Ok(rev) = classify(&e.state, target, source, matrix) {
            e.bidirectional =
                e.classes.contains(&AttackClass::SideChannel) && rev.classes.contains(&AttackClass::SideChannel);
        }
    }
    let mut by_register: BTreeMap<String, (BTreeSet<AttackClass>, Vec<String>)> = BTreeMap::new();
    for e in entries.iter().filter(|e| e.sensitive && !e.state.is_whole()) {
        let slot = by_register.entry(e.state.register.clone()).or_default();
        slot.0.extend(e.classes.iter().copied());
        slot.1.push(e.state.field.clone().unwrap_or_default());
    }
    for e in entries.iter_mut().filter(|e| e.state.is_whole()) {
        if let Some((classes, fields)) = by_register.get(&e.state.register) {
            if !classes.is_subset(&e.classes) {
                e.classes.extend(classes.iter().copied());
                e.sensitive = true;
                e.justification.push(RuleFiring {
                    rule: "field-rollup".into(),
                    flags: format!("fields {}", fields.join(";")),
                });
            }
        }
    }
    let mut summary = Summary {
        total_states: entries.len(),
        ..Summary::default()
    };
    for e in &entries {
        if e.state.is_whole() {
            summary.registers_total += 1;
        } else {
            summary.fields_total += 1;
        }
        if !e.sensitive {
            continue;
        }
        summary.sensitive_states += 1;
        if e.state.is_whole() {
            summary.registers_sensitive += 1;
        } else {
            summary.fields_sensitive += 1;
        }
        if e.kind != StateKind::Gpr {
            summary.non_gpr_sensitive += 1;
        }
        for c in &e.classes {
            *summary.by_class.entry(c.to_string()).or_default() += 1;
        }
    }
    SensitivityReport {
        source: source.clone(),
        target: target.clone(),
        summary,
        entries,
    }
}
