//! Cross-file resolution of parsed units into one model.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use super::body::{analyze_body, RegisterIndex};
use super::parser::{parse_int, parse_unit, shape_of};
use super::{
    BitfieldDecl, EnumDecl, ExecuteClause, FunctionDef, MappingDecl, NameSet, OpaqueSpan, OverloadMap, RegisterDecl,
    RegisterType, SourceUnit, SyntaxError, TypeTarget,
};

#[derive(Clone, Debug, Default)]
pub struct SailModel {
    pub files: Vec<String>,
    pub registers: BTreeMap<String, RegisterDecl>,
    pub bitfields: BTreeMap<String, BitfieldDecl>,
    pub type_aliases: BTreeMap<String, TypeTarget>,
    pub enums: BTreeMap<String, EnumDecl>,
    pub constructors: NameSet,
    pub functions: BTreeMap<String, FunctionDef>,
    pub execute_clauses: BTreeMap<String, ExecuteClause>,
    pub mappings: BTreeMap<String, MappingDecl>,
    pub vals: NameSet,
    pub overloads: OverloadMap,
    pub opaque: Vec<OpaqueSpan>,
    /// Callees with no definition in the corpus.
    pub externals: NameSet,
    pub index: RegisterIndex,
}

/// Expands directories to the `*.sail` files they contain; the result is
/// sorted and deduplicated.
pub fn collect_sail_files<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<PathBuf>, SyntaxError> {
    let mut out = Vec::new();
    for p in paths {
        let p = p.as_ref();
        if p.is_dir() {
            let entries = std::fs::read_dir(p).map_err(|source| SyntaxError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            for e in entries {
                let e = e.map_err(|source| SyntaxError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                let path = e.path();
                if path.extension().is_some_and(|x| x == "sail") {
                    out.push(path);
                }
            }
        } else {
            out.push(p.to_path_buf());
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Parses the given files in sorted path order.
pub fn parse_corpus<P: AsRef<Path>>(paths: &[P]) -> Result<SailModel, SyntaxError> {
    let mut sorted = collect_sail_files(paths)?;
    sorted.sort();
    sorted.dedup();
    let mut sources = Vec::with_capacity(sorted.len());
    for path in sorted {
        let text = std::fs::read_to_string(&path).map_err(|source| SyntaxError::Io {
            path: path.clone(),
            source,
        })?;
        sources.push((path.display().to_string(), text));
    }
    parse_sources(&sources)
}

/// Parses in-memory sources given as `(path, text)` pairs.
pub fn parse_sources(sources: &[(String, String)]) -> Result<SailModel, SyntaxError> {
    if sources.is_empty() {
        return Err(SyntaxError::EmptyCorpus);
    }
    let mut units = Vec::with_capacity(sources.len());
    for (path, text) in sources {
        units.push(parse_unit(text, path)?);
    }
    let mut model = SailModel::default();
    for unit in units {
        model.absorb(unit)?;
    }
    model.resolve();
    Ok(model)
}

impl SailModel {
    fn absorb(&mut self, unit: SourceUnit) -> Result<(), SyntaxError> {
        self.files.push(unit.path);
        for r in unit.registers {
            if let Some(prev) = self.registers.get(&r.name) {
                return Err(cross(&r.name, &prev.location, &r.location));
            }
            self.registers.insert(r.name.clone(), r);
        }
        for b in unit.bitfield_types {
            if let Some(prev) = self.bitfields.get(&b.name) {
                return Err(cross(&b.name, &prev.location, &b.location));
            }
            self.bitfields.insert(b.name.clone(), b);
        }
        for a in unit.type_aliases {
            self.type_aliases.insert(a.name, a.target);
        }
        for e in unit.enums {
            self.enums.insert(e.name.clone(), e);
        }
        self.constructors.extend(unit.constructors);
        for f in unit.functions {
            match self.functions.get_mut(&f.name) {
                Some(prev) if prev.scattered && f.scattered => prev.clauses.extend(f.clauses),
                Some(prev) => return Err(cross(&f.name, &prev.location, &f.location)),
                None => {
                    self.functions.insert(f.name.clone(), f);
                }
            }
        }
        for e in unit.execute_clauses {
            if let Some(prev) = self.execute_clauses.get(&e.instruction) {
                return Err(cross(&e.instruction, &prev.location, &e.location));
            }
            self.execute_clauses.insert(e.instruction.clone(), e);
        }
        for m in unit.mappings {
            self.mappings
                .entry(m.name.clone())
                .or_insert_with(|| MappingDecl {
                    name: m.name.clone(),
                    pairs: Vec::new(),
                })
                .pairs
                .extend(m.pairs);
        }
        self.vals.extend(unit.vals);
        for (name, members) in unit.overloads {
            self.overloads.entry(name).or_default().extend(members);
        }
        self.opaque.extend(unit.opaque);
        Ok(())
    }

    fn resolve(&mut self) {
        self.functions.retain(|_, f| !f.clauses.is_empty());
        let mut index = RegisterIndex::default();
        for r in self.registers.values() {
            index.insert(&r.name, shape_of(r, |n| self.bitfields.get(n)));
        }
        let mut ctors = self.constructors.clone();
        ctors.extend(self.bitfields.keys().map(|b| format!("Mk_{b}")));
        for f in self.functions.values_mut() {
            for c in &mut f.clauses {
                c.facts = analyze_body(&c.body, &index);
            }
            f.refresh_summary();
            let raw: Vec<String> = f.call_names().map(str::to_string).collect();
            f.callees = resolve_calls(raw.iter().map(String::as_str), &self.overloads, &ctors);
        }
        for e in self.execute_clauses.values_mut() {
            e.facts = analyze_body(&e.body, &index);
            e.refresh_summary();
            e.callees = resolve_calls(e.facts.calls.iter().map(|c| c.name.as_str()), &self.overloads, &ctors);
        }
        let mut externals = NameSet::new();
        let all_callees = self
            .functions
            .values()
            .flat_map(|f| f.callees.iter())
            .chain(self.execute_clauses.values().flat_map(|e| e.callees.iter()));
        for c in all_callees {
            if !self.functions.contains_key(c) {
                externals.insert(c.clone());
            }
        }
        self.externals = externals;
        self.index = index;
    }

    /// Removes one call-graph edge. Returns whether the edge existed.
    pub fn remove_call_edge(&mut self, caller: &str, callee: &str) -> bool {
        if let Some(f) = self.functions.get_mut(caller) {
            return f.callees.remove(callee);
        }
        if let Some(e) = self.execute_clauses.get_mut(caller) {
            return e.callees.remove(callee);
        }
        false
    }

    pub fn bitfield_of(&self, register: &str) -> Option<&BitfieldDecl> {
        match &self.registers.get(register)?.ty {
            RegisterType::Named(ty) => self.bitfields.get(ty),
            RegisterType::Vector { .. } => None,
        }
    }

    /// Width in bits of a type expression, following aliases.
    pub fn type_width(&self, ty: &str) -> Option<u32> {
        self.type_width_depth(ty, 0)
    }

    fn type_width_depth(&self, ty: &str, depth: usize) -> Option<u32> {
        if depth > 32 {
            return None;
        }
        if let Some(n) = ty.strip_prefix("bits(").and_then(|r| r.strip_suffix(')')) {
            return parse_int(n);
        }
        if ty == "bool" || ty == "bit" {
            return Some(1);
        }
        if let Some(b) = self.bitfields.get(ty) {
            return Some(b.width);
        }
        if let Some(e) = self.enums.get(ty) {
            let n = e.members.len().max(2) as u32;
            return Some(32 - (n - 1).leading_zeros());
        }
        match self.type_aliases.get(ty)? {
            TypeTarget::Bits(w) => Some(*w),
            TypeTarget::Named(other) => self.type_width_depth(other, depth + 1),
        }
    }

    pub fn register_width(&self, register: &str) -> Option<u32> {
        match &self.registers.get(register)?.ty {
            RegisterType::Named(ty) => self.type_width(ty),
            RegisterType::Vector { elem, .. } => self.type_width(elem),
        }
    }

    pub fn callees_of(&self, name: &str) -> Option<&BTreeSet<String>> {
        self.functions.get(name).map(|f| &f.callees)
    }
}

fn cross(name: &str, first: &super::Location, second: &super::Location) -> SyntaxError {
    SyntaxError::CrossFileDuplicate {
        name: name.to_string(),
        first: first.clone(),
        second: second.clone(),
    }
}

fn resolve_calls<'a>(raw: impl Iterator<Item = &'a str>, overloads: &OverloadMap, ctors: &NameSet) -> NameSet {
    let mut out = NameSet::new();
    let mut stack: Vec<String> = raw.map(str::to_string).collect();
    let mut seen = NameSet::new();
    while let Some(name) = stack.pop() {
        if !seen.insert(name.clone()) {
            continue;
        }
        // `execute` called from the fetch loop is instruction dispatch.
        if name == "execute" || ctors.contains(&name) {
            continue;
        }
        if let Some(members) = overloads.get(&name) {
            stack.extend(members.iter().cloned());
            continue;
        }
        out.insert(name);
    }
    out
}
