//! Declarative backend configuration.
//!
//! One `key = value` pair per line, `#` comments, comma-separated lists.
//! `privilege_modes` lists `Name:level` pairs; `mode_aliases` lists
//! `Mode=Literal` pairs naming the enum literal the corpus uses for a mode.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use super::PrivilegeMode;

const DEFAULT_RISCV: &str = include_str!("../../backends/riscv.cfg");
const DEFAULT_RISCV_H: &str = include_str!("../../backends/riscv-h.cfg");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("cannot read backend config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BankConfig {
    /// Register vector holding the bank, e.g. `Xs`.
    pub bank: String,
    /// Prefix of element names, e.g. `x` for `x0`..`x31`.
    pub prefix: String,
    /// Accessor function taking a register index, e.g. `X`.
    pub accessor: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BackendConfig {
    pub xlen: u32,
    /// Ordered from least to most privileged.
    pub modes: Vec<PrivilegeMode>,
    pub mode_aliases: BTreeMap<String, String>,
    pub privilege_register: String,
    pub trap_functions: Vec<String>,
    pub entry_functions: Vec<String>,
    pub gpr: Option<BankConfig>,
    pub fpr: Option<BankConfig>,
    pub vector: Option<BankConfig>,
    pub csr_name_map: Option<String>,
    pub csr_read_helper: Option<String>,
    pub csr_write_helper: Option<String>,
    pub csr_permission_functions: Vec<String>,
    pub internal_registers: Vec<String>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::riscv()
    }
}

impl BackendConfig {
    pub fn riscv() -> Self {
        BackendConfig::parse(DEFAULT_RISCV).expect("bundled riscv backend parses")
    }

    pub fn riscv_hypervisor() -> Self {
        BackendConfig::parse(DEFAULT_RISCV_H).expect("bundled riscv-h backend parses")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        BackendConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    message: format!("expected `key = value`, found `{line}`"),
                });
            };
            kv.insert(k.trim().to_string(), (idx + 1, v.trim().to_string()));
        }
        let mut take = |key: &str| kv.remove(key);

        let (modes_line, modes_raw) = take("privilege_modes").ok_or(ConfigError::MissingKey("privilege_modes"))?;
        let mut modes = Vec::new();
        for item in list(&modes_raw) {
            let (name, level) = item.split_once(':').ok_or_else(|| ConfigError::Syntax {
                line: modes_line,
                message: format!("privilege mode `{item}` must be `Name:level`"),
            })?;
            let level: u8 = level.trim().parse().map_err(|_| ConfigError::Syntax {
                line: modes_line,
                message: format!("bad privilege level in `{item}`"),
            })?;
            modes.push(PrivilegeMode::new(name.trim(), level));
        }
        if modes.is_empty() {
            return Err(ConfigError::MissingKey("privilege_modes"));
        }
        modes.sort();
        let privilege_register = take("privilege_register")
            .map(|(_, v)| v)
            .ok_or(ConfigError::MissingKey("privilege_register"))?;

        let mut mode_aliases = BTreeMap::new();
        if let Some((line, raw)) = take("mode_aliases") {
            for item in list(&raw) {
                let (m, lit) = item.split_once('=').ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: format!("mode alias `{item}` must be `Mode=Literal`"),
                })?;
                mode_aliases.insert(m.trim().to_string(), lit.trim().to_string());
            }
        }
        let xlen = match take("xlen") {
            Some((line, v)) => v.parse().map_err(|_| ConfigError::Syntax {
                line,
                message: format!("bad xlen `{v}`"),
            })?,
            None => 64,
        };
        let single = |v: Option<(usize, String)>| v.map(|(_, s)| s).filter(|s| !s.is_empty());
        let many = |v: Option<(usize, String)>| v.map(|(_, s)| list(&s)).unwrap_or_default();
        let mut bank = |kind: &str| {
            let bank = single(take(&format!("{kind}_bank")))?;
            let prefix = single(take(&format!("{kind}_prefix"))).unwrap_or_else(|| kind[..1].to_string());
            let accessor = single(take(&format!("{kind}_accessor"))).unwrap_or_default();
            Some(BankConfig { bank, prefix, accessor })
        };
        let gpr = bank("gpr");
        let fpr = bank("fpr");
        let vector = bank("vector");
        let cfg = BackendConfig {
            xlen,
            modes,
            mode_aliases,
            privilege_register,
            trap_functions: many(take("trap_functions")),
            entry_functions: many(take("entry_functions")),
            gpr,
            fpr,
            vector,
            csr_name_map: single(take("csr_name_map")),
            csr_read_helper: single(take("csr_read_helper")),
            csr_write_helper: single(take("csr_write_helper")),
            csr_permission_functions: many(take("csr_permission_functions")),
            internal_registers: many(take("internal_registers")),
        };
        if let Some((key, (line, _))) = kv.into_iter().next() {
            return Err(ConfigError::Syntax {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        Ok(cfg)
    }

    /// Looks a mode up by name, accepting the usual one/two-letter
    /// abbreviations (U, S, M, VS, HS) case-insensitively.
    pub fn mode(&self, name: &str) -> Option<PrivilegeMode> {
        let wanted = name.trim();
        self.modes
            .iter()
            .find(|m| m.name().eq_ignore_ascii_case(wanted) || abbreviation(m.name()).eq_ignore_ascii_case(wanted))
            .cloned()
    }

    /// The enum literal the corpus uses for `mode`.
    pub fn literal_of<'a>(&'a self, mode: &'a PrivilegeMode) -> &'a str {
        self.mode_aliases.get(mode.name()).map_or(mode.name(), String::as_str)
    }

    /// Comparison level of a mode literal: the lowest level of the modes it
    /// stands for.
    pub fn literal_level(&self, literal: &str) -> Option<u8> {
        self.modes
            .iter()
            .filter(|m| self.literal_of(m) == literal)
            .map(PrivilegeMode::level)
            .min()
    }

    pub fn is_internal(&self, register: &str) -> bool {
        self.internal_registers.iter().any(|r| r == register)
    }

    pub fn is_trap_function(&self, name: &str) -> bool {
        self.trap_functions.iter().any(|t| t == name)
    }

    pub fn banks(&self) -> impl Iterator<Item = &BankConfig> {
        self.gpr.iter().chain(self.fpr.iter()).chain(self.vector.iter())
    }
}

fn abbreviation(name: &str) -> String {
    name.chars().filter(|c| c.is_ascii_uppercase()).collect()
}

fn list(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}
