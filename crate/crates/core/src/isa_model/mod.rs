//! The ISA-specific backend: state discovery, privilege modes, explicit
//! CSR access rights and the dispatch-loop baseline.
//!
//! Everything RISC-V specific is named by a [`BackendConfig`]; the analysis
//! itself only knows about banks, helper functions and mode literals.

mod access;
mod config;
mod guards;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::footprint::{self, Footprint};
use crate::sail_syntax::{RegisterType, SailModel};
use crate::state::{StateInfo, StateKind, StateRef};

pub use access::{CsrMap, PermissionRules};
pub use config::{BackendConfig, BankConfig, ConfigError};
pub use guards::instruction_privileges;

/// A privilege mode, ordered by privilege level.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrivilegeMode {
    level: u8,
    name: String,
}

impl PrivilegeMode {
    pub fn new(name: &str, level: u8) -> Self {
        PrivilegeMode {
            level,
            name: name.to_string(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn level(&self) -> u8 {
        self.level
    }
}

impl fmt::Display for PrivilegeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl Serialize for PrivilegeMode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.name)
    }
}

pub type ModeSet = BTreeSet<PrivilegeMode>;

pub fn join_modes(modes: &ModeSet) -> String {
    modes.iter().map(PrivilegeMode::name).collect::<Vec<_>>().join(";")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ModeAccess {
    pub readable: bool,
    pub writable: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplicitAccess {
    pub state: StateRef,
    pub modes: BTreeMap<PrivilegeMode, ModeAccess>,
}

impl ExplicitAccess {
    pub fn get(&self, mode: &PrivilegeMode) -> ModeAccess {
        self.modes.get(mode).copied().unwrap_or_default()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IsaError {
    #[error("CSR `{0}` has no address in the corpus")]
    UnknownCsrAddress(String),
    #[error("entry function `{0}` is not defined in the corpus")]
    MissingEntryFunction(String),
    #[error("unknown instruction `{0}`")]
    UnknownInstruction(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
}

/// Backend analysis over one parsed model.
#[derive(Debug)]
pub struct Isa<'m> {
    pub model: &'m SailModel,
    pub config: &'m BackendConfig,
    pub states: Vec<StateInfo>,
    pub csrs: CsrMap,
    pub rules: PermissionRules,
    /// Problems found while setting up (unknown CSR addresses).
    pub diagnostics: Vec<IsaError>,
    kinds: BTreeMap<StateRef, StateKind>,
}

impl<'m> Isa<'m> {
    pub fn new(model: &'m SailModel, config: &'m BackendConfig) -> Self {
        let csrs = CsrMap::build(model, config);
        let rules = PermissionRules::extract(model, config);
        let states = discover_states_with(model, config, &csrs);
        let mut diagnostics = Vec::new();
        for s in &states {
            if s.kind == StateKind::Csr && s.state.is_whole() && !csrs.has_address(&s.state.register) {
                diagnostics.push(IsaError::UnknownCsrAddress(s.state.register.clone()));
            }
        }
        let kinds = states.iter().map(|s| (s.state.clone(), s.kind)).collect();
        Isa {
            model,
            config,
            states,
            csrs,
            rules,
            diagnostics,
            kinds,
        }
    }

    pub fn modes(&self) -> &[PrivilegeMode] {
        &self.config.modes
    }

    pub fn all_modes(&self) -> ModeSet {
        self.config.modes.iter().cloned().collect()
    }

    pub fn kind_of(&self, state: &StateRef) -> Option<StateKind> {
        self.kinds.get(state).copied()
    }

    pub fn contains(&self, state: &StateRef) -> bool {
        self.kinds.contains_key(state)
    }

    pub fn derive_explicit_access(&self, state: &StateRef) -> Result<ExplicitAccess, IsaError> {
        let kind = self
            .kind_of(state)
            .ok_or_else(|| IsaError::UnknownState(state.to_string()))?;
        Ok(access::derive(self, state, kind))
    }

    pub fn explicit_access_all(&self) -> Vec<ExplicitAccess> {
        self.states
            .iter()
            .map(|s| access::derive(self, &s.state, s.kind))
            .collect()
    }

    pub fn instruction_privileges(&self, instruction: &str) -> Result<ModeSet, IsaError> {
        instruction_privileges(self.model, self.config, instruction)
    }

    /// Footprint of the per-instruction dispatch path. Missing entry
    /// functions are skipped with a warning.
    pub fn baseline_footprint(&self) -> (Footprint, Vec<IsaError>) {
        baseline_footprint(self.model, self.config)
    }
}

pub fn baseline_footprint(model: &SailModel, config: &BackendConfig) -> (Footprint, Vec<IsaError>) {
    let mut missing = Vec::new();
    let mut roots = Vec::new();
    for entry in &config.entry_functions {
        if model.functions.contains_key(entry) {
            roots.push(entry.clone());
        } else {
            log::warn!("baseline entry function `{entry}` not found; skipping it");
            missing.push(IsaError::MissingEntryFunction(entry.clone()));
        }
    }
    if !missing.is_empty() && roots.is_empty() {
        return (Footprint::default(), missing);
    }
    let direct = footprint::direct_footprints(model, config);
    let all = footprint::propagate(&direct);
    let mut fp = Footprint::default();
    for r in roots {
        if let Some(f) = all.get(&r) {
            fp.extend(f);
        }
    }
    (fp, missing)
}

pub fn discover_states(model: &SailModel, config: &BackendConfig) -> Vec<StateInfo> {
    discover_states_with(model, config, &CsrMap::build(model, config))
}

fn discover_states_with(model: &SailModel, config: &BackendConfig, csrs: &CsrMap) -> Vec<StateInfo> {
    let mut out = Vec::new();
    for (name, decl) in &model.registers {
        let width = model.register_width(name).unwrap_or(config.xlen);
        if let RegisterType::Vector { len, .. } = &decl.ty {
            let bank = config.banks().find(|b| &b.bank == name);
            let kind = match bank {
                Some(b) if Some(b) == config.gpr.as_ref() => StateKind::Gpr,
                Some(b) if Some(b) == config.fpr.as_ref() => StateKind::Fpr,
                Some(_) => StateKind::Vector,
                None => StateKind::Internal,
            };
            match bank {
                Some(b) => {
                    for i in 0..*len {
                        out.push(StateInfo {
                            state: StateRef::whole(format!("{}{i}", b.prefix)),
                            width_bits: width,
                            kind,
                        });
                    }
                }
                None => out.push(StateInfo {
                    state: StateRef::whole(name),
                    width_bits: width.saturating_mul(*len),
                    kind,
                }),
            }
            continue;
        }
        let bitfield = model.bitfield_of(name);
        let kind = if config.is_internal(name) {
            StateKind::Internal
        } else if csrs.has_address(name) || bitfield.is_some() {
            StateKind::Csr
        } else {
            StateKind::Internal
        };
        out.push(StateInfo {
            state: StateRef::whole(name),
            width_bits: width,
            kind,
        });
        if let Some(b) = bitfield {
            for f in &b.fields {
                out.push(StateInfo {
                    state: StateRef::field(name, &f.name),
                    width_bits: f.width(),
                    kind,
                });
            }
        }
    }
    out
}


pub(crate) fn parse_index(text: &str) -> Option<u32> {
    access::parse_number(text)
}
