//! Explicit access rights derived from the CSR helpers and the permission
//! check functions.

use std::collections::{BTreeMap, BTreeSet};

use crate::sail_syntax::{SailModel, Token, TokenKind};
use crate::state::{StateKind, StateRef};

use super::{BackendConfig, ExplicitAccess, Isa, ModeAccess, PrivilegeMode};

/// Which registers each CSR address reads and writes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CsrMap {
    pub reads: BTreeMap<u32, BTreeSet<String>>,
    pub writes: BTreeMap<u32, BTreeSet<String>>,
}

impl CsrMap {
    pub fn build(model: &SailModel, config: &BackendConfig) -> Self {
        let mut map = CsrMap::default();
        let keep = |r: &StateRef| !config.is_internal(&r.register) && !model_is_bank(model, &r.register);
        if let Some(f) = config.csr_read_helper.as_ref().and_then(|h| model.functions.get(h)) {
            for c in &f.clauses {
                if let Some(addr) = first_number(&c.header) {
                    let regs = c.facts.reads.iter().filter(|r| keep(r)).map(|r| r.register.clone());
                    map.reads.entry(addr).or_default().extend(regs);
                }
            }
        }
        if let Some(f) = config.csr_write_helper.as_ref().and_then(|h| model.functions.get(h)) {
            for c in &f.clauses {
                if let Some(addr) = first_number(&c.header) {
                    let regs = c.facts.writes.iter().filter(|r| keep(r)).map(|r| r.register.clone());
                    map.writes.entry(addr).or_default().extend(regs);
                }
            }
        }
        if let Some(m) = config.csr_name_map.as_ref().and_then(|n| model.mappings.get(n)) {
            for (lit, name) in &m.pairs {
                let (Some(addr), name) = (parse_number(lit), name.trim_matches('"')) else {
                    continue;
                };
                if !model.registers.contains_key(name) || config.is_internal(name) {
                    continue;
                }
                let has_write_clause = map.writes.contains_key(&addr);
                map.reads.entry(addr).or_default().insert(name.to_string());
                if !has_write_clause {
                    map.writes.entry(addr).or_default().insert(name.to_string());
                }
            }
        }
        map
    }

    pub fn has_address(&self, register: &str) -> bool {
        !self.addresses_of(register).is_empty()
    }

    pub fn addresses_of(&self, register: &str) -> BTreeSet<u32> {
        self.reads
            .iter()
            .chain(self.writes.iter())
            .filter(|(_, regs)| regs.contains(register))
            .map(|(a, _)| *a)
            .collect()
    }
}

fn model_is_bank(model: &SailModel, register: &str) -> bool {
    model.index.get(register).is_some_and(|shape| shape.bank)
}

/// Access rules recovered from the permission functions, or the address
/// convention when the corpus has none.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermissionRules {
    /// Bits 9..8 of the address give the lowest privilege level.
    pub level_bits: bool,
    /// Bits 11..10 == 0b11 mark a read-only address.
    pub read_only_bits: bool,
    /// Per-address minimum mode literal, from `0xNNN => Mode` arms.
    pub overrides: BTreeMap<u32, String>,
    pub from_convention: bool,
}

impl PermissionRules {
    pub fn convention() -> Self {
        PermissionRules {
            level_bits: true,
            read_only_bits: true,
            overrides: BTreeMap::new(),
            from_convention: true,
        }
    }

    pub fn extract(model: &SailModel, config: &BackendConfig) -> Self {
        let funcs: Vec<_> = config
            .csr_permission_functions
            .iter()
            .filter_map(|n| model.functions.get(n))
            .collect();
        if funcs.is_empty() {
            return PermissionRules::convention();
        }
        let mut rules = PermissionRules {
            level_bits: false,
            read_only_bits: false,
            overrides: BTreeMap::new(),
            from_convention: false,
        };
        for f in funcs {
            for c in &f.clauses {
                let toks: Vec<&Token> = c.header.iter().chain(c.body.iter()).collect();
                for k in 0..toks.len() {
                    if slice_at(&toks, k, 9, 8) {
                        rules.level_bits = true;
                    }
                    if slice_at(&toks, k, 11, 10)
                        && toks.get(k + 5).is_some_and(|t| t.is_op("=="))
                        && toks.get(k + 6).is_some_and(|t| parse_number(&t.text) == Some(3))
                    {
                        rules.read_only_bits = true;
                    }
                    if toks[k].kind == TokenKind::Literal && toks.get(k + 1).is_some_and(|t| t.is_op("=>")) {
                        if let (Some(addr), Some(lit)) = (parse_number(&toks[k].text), toks.get(k + 2)) {
                            if config.literal_level(&lit.text).is_some() {
                                rules.overrides.insert(addr, lit.text.clone());
                            }
                        }
                    }
                }
            }
        }
        rules
    }

    pub fn min_level(&self, config: &BackendConfig, addr: u32) -> u8 {
        if let Some(level) = self.overrides.get(&addr).and_then(|l| config.literal_level(l)) {
            return level;
        }
        if self.level_bits {
            ((addr >> 8) & 0b11) as u8
        } else {
            0
        }
    }

    pub fn read_only(&self, addr: u32) -> bool {
        self.read_only_bits && (addr >> 10) & 0b11 == 0b11
    }

    pub fn can_read(&self, config: &BackendConfig, mode: &PrivilegeMode, addr: u32) -> bool {
        mode.level() >= self.min_level(config, addr)
    }

    pub fn can_write(&self, config: &BackendConfig, mode: &PrivilegeMode, addr: u32) -> bool {
        self.can_read(config, mode, addr) && !self.read_only(addr)
    }
}

fn slice_at(toks: &[&Token], k: usize, hi: u32, lo: u32) -> bool {
    toks.get(k).is_some_and(|t| t.is_punct("["))
        && toks.get(k + 1).is_some_and(|t| parse_number(&t.text) == Some(hi))
        && toks.get(k + 2).is_some_and(|t| t.is_op(".."))
        && toks.get(k + 3).is_some_and(|t| parse_number(&t.text) == Some(lo))
        && toks.get(k + 4).is_some_and(|t| t.is_punct("]"))
}

fn first_number(toks: &[Token]) -> Option<u32> {
    toks.iter()
        .filter(|t| t.kind == TokenKind::Literal)
        .find_map(|t| parse_number(&t.text))
}

pub(crate) fn parse_number(text: &str) -> Option<u32> {
    let clean: String = text.chars().filter(|&c| c != '_').collect();
    if let Some(h) = clean.strip_prefix("0x") {
        u32::from_str_radix(h, 16).ok()
    } else if let Some(b) = clean.strip_prefix("0b") {
        u32::from_str_radix(b, 2).ok()
    } else if clean.bytes().all(|b| b.is_ascii_digit()) && !clean.is_empty() {
        clean.parse().ok()
    } else {
        None
    }
}

pub(super) fn derive(isa: &Isa<'_>, state: &StateRef, kind: StateKind) -> ExplicitAccess {
    let mut modes = BTreeMap::new();
    for mode in isa.modes() {
        let access = match kind {
            StateKind::Gpr => {
                let zero = isa.config.gpr.as_ref().map(|g| format!("{}0", g.prefix));
                ModeAccess {
                    readable: true,
                    writable: zero.as_deref() != Some(state.register.as_str()),
                }
            }
            StateKind::Csr => csr_access(isa, &state.register, mode),
            _ => ModeAccess::default(),
        };
        modes.insert(mode.clone(), access);
    }
    ExplicitAccess {
        state: state.clone(),
        modes,
    }
}

fn csr_access(isa: &Isa<'_>, register: &str, mode: &PrivilegeMode) -> ModeAccess {
    let writable = isa
        .csrs
        .writes
        .iter()
        .any(|(a, regs)| regs.contains(register) && isa.rules.can_write(isa.config, mode, *a));
    let readable = writable
        || isa
            .csrs
            .reads
            .iter()
            .any(|(a, regs)| regs.contains(register) && isa.rules.can_read(isa.config, mode, *a));
    ModeAccess { readable, writable }
}
