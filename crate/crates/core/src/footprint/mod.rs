//! Per-function and per-instruction ISA-state footprints.
//!
//! Direct footprints come from the register expressions in each body;
//! [`propagate`] closes them over the call graph with a worklist, so cyclic
//! call graphs are fine.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;

use serde::Serialize;

use crate::isa_model::{self, join_modes, BackendConfig, BankConfig, IsaError, ModeSet};
use crate::sail_syntax::{BodyFacts, SailModel, Token, TokenKind};
use crate::state::{AccessKind, Direction, StateRef};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Access {
    pub state: StateRef,
    pub kind: AccessKind,
}

impl Access {
    pub fn new(state: StateRef, kind: AccessKind) -> Self {
        Access { state, kind }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Footprint {
    pub reads: BTreeSet<Access>,
    pub writes: BTreeSet<Access>,
}

impl Footprint {
    pub fn is_empty(&self) -> bool {
        self.reads.is_empty() && self.writes.is_empty()
    }

    /// Adds everything in `other`; returns whether anything was new.
    pub fn extend(&mut self, other: &Footprint) -> bool {
        let before = self.reads.len() + self.writes.len();
        self.reads.extend(other.reads.iter().cloned());
        self.writes.extend(other.writes.iter().cloned());
        self.reads.len() + self.writes.len() != before
    }

    pub fn is_superset(&self, other: &Footprint) -> bool {
        self.reads.is_superset(&other.reads) && self.writes.is_superset(&other.writes)
    }

    pub fn accesses(&self, dir: Direction) -> &BTreeSet<Access> {
        match dir {
            Direction::Read => &self.reads,
            Direction::Write => &self.writes,
        }
    }

    pub fn add(&mut self, dir: Direction, access: Access) {
        match dir {
            Direction::Read => self.reads.insert(access),
            Direction::Write => self.writes.insert(access),
        };
    }

    pub fn states(&self, dir: Direction) -> BTreeSet<&StateRef> {
        self.accesses(dir).iter().map(|a| &a.state).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DirectEntry {
    pub footprint: Footprint,
    pub callees: BTreeSet<String>,
}

pub type DirectMap = BTreeMap<String, DirectEntry>;

/// Map key of an instruction's execute clause.
pub fn instruction_key(instruction: &str) -> String {
    format!("execute:{instruction}")
}

pub fn direct_footprints(model: &SailModel, config: &BackendConfig) -> DirectMap {
    let mut out = DirectMap::new();
    let helpers: Vec<&String> = config
        .csr_read_helper
        .iter()
        .chain(config.csr_write_helper.iter())
        .collect();
    for (name, f) in &model.functions {
        let explicit = helpers.contains(&name);
        let mut fp = Footprint::default();
        for c in &f.clauses {
            body_footprint(&c.body, &c.facts, explicit, model, config, &mut fp);
        }
        out.insert(
            name.clone(),
            DirectEntry {
                footprint: fp,
                callees: f.callees.clone(),
            },
        );
    }
    for (name, e) in &model.execute_clauses {
        let mut fp = Footprint::default();
        body_footprint(&e.body, &e.facts, false, model, config, &mut fp);
        out.insert(
            instruction_key(name),
            DirectEntry {
                footprint: fp,
                callees: e.callees.clone(),
            },
        );
    }
    out
}

fn body_footprint(
    toks: &[Token],
    facts: &BodyFacts,
    explicit: bool,
    model: &SailModel,
    config: &BackendConfig,
    fp: &mut Footprint,
) {
    let kind = if explicit {
        AccessKind::Explicit
    } else {
        AccessKind::Implicit
    };
    for (dir, set) in [(Direction::Read, &facts.reads), (Direction::Write, &facts.writes)] {
        for s in set {
            for state in expand(s, model, config) {
                record(fp, dir, state, kind, config);
            }
        }
    }
    for call in &facts.calls {
        let Some((bank, bank_kind)) = accessor(config, &call.name) else {
            continue;
        };
        let dir = if call.assigned {
            Direction::Write
        } else {
            Direction::Read
        };
        let args = &toks[call.args.clone()];
        let indices: Vec<u32> = match args {
            [t] if t.kind == TokenKind::Literal => match crate::isa_model::parse_index(&t.text) {
                Some(i) => vec![i],
                None => bank_indices(model, bank),
            },
            _ => bank_indices(model, bank),
        };
        for i in indices {
            record(
                fp,
                dir,
                StateRef::whole(format!("{}{i}", bank.prefix)),
                bank_kind,
                config,
            );
        }
    }
}

fn record(fp: &mut Footprint, dir: Direction, state: StateRef, kind: AccessKind, config: &BackendConfig) {
    if dir == Direction::Write {
        if let Some(g) = &config.gpr {
            if state.register == format!("{}0", g.prefix) {
                return;
            }
        }
    }
    fp.add(dir, Access::new(state, kind));
}

fn accessor<'c>(config: &'c BackendConfig, name: &str) -> Option<(&'c BankConfig, AccessKind)> {
    if let Some(g) = config.gpr.as_ref().filter(|g| g.accessor == name) {
        return Some((g, AccessKind::Explicit));
    }
    config
        .fpr
        .iter()
        .chain(config.vector.iter())
        .find(|b| !b.accessor.is_empty() && b.accessor == name)
        .map(|b| (b, AccessKind::Implicit))
}

fn bank_indices(model: &SailModel, bank: &BankConfig) -> Vec<u32> {
    match model.registers.get(&bank.bank).map(|r| &r.ty) {
        Some(crate::sail_syntax::RegisterType::Vector { len, .. }) => (0..*len).collect(),
        _ => (0..32).collect(),
    }
}

fn expand(s: &StateRef, model: &SailModel, config: &BackendConfig) -> Vec<StateRef> {
    match config.banks().find(|b| b.bank == s.register) {
        Some(b) => bank_indices(model, b)
            .into_iter()
            .map(|i| StateRef::whole(format!("{}{i}", b.prefix)))
            .collect(),
        None => vec![s.clone()],
    }
}

/// Least fixpoint of `fp(f) = direct(f) ∪ ⋃ fp(g)` over callees `g`.
/// Callees without an entry contribute nothing.
pub fn propagate(direct: &DirectMap) -> BTreeMap<String, Footprint> {
    let mut fp: BTreeMap<String, Footprint> = direct.iter().map(|(k, v)| (k.clone(), v.footprint.clone())).collect();
    let mut callers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (name, entry) in direct {
        for c in &entry.callees {
            if direct.contains_key(c) {
                callers.entry(c.as_str()).or_default().push(name.as_str());
            }
        }
    }
    let mut queue: VecDeque<&str> = direct.keys().map(String::as_str).collect();
    let mut queued: BTreeSet<&str> = queue.iter().copied().collect();
    while let Some(n) = queue.pop_front() {
        queued.remove(n);
        let Some(ps) = callers.get(n) else { continue };
        let current = fp[n].clone();
        for &p in ps {
            let changed = fp.get_mut(p).expect("caller has an entry").extend(&current);
            if changed && queued.insert(p) {
                queue.push_back(p);
            }
        }
    }
    fp
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InstructionInsight {
    pub instruction: String,
    pub privileges: ModeSet,
    pub footprint: Footprint,
    /// Undefined callees reached from the instruction.
    pub externals: BTreeSet<String>,
    /// Call-path hint per access: where the access was first found.
    #[serde(skip)]
    pub via: BTreeMap<(Direction, Access), String>,
}

pub fn instruction_insights(
    model: &SailModel,
    config: &BackendConfig,
    include_baseline: bool,
) -> Result<Vec<InstructionInsight>, IsaError> {
    let direct = direct_footprints(model, config);
    let all = propagate(&direct);
    let mut baseline = Footprint::default();
    let mut baseline_via = BTreeMap::new();
    if include_baseline {
        let (fp, _missing) = isa_model::baseline_footprint(model, config);
        baseline = fp;
        for entry in &config.entry_functions {
            if direct.contains_key(entry) {
                for (k, v) in via_paths(&direct, entry, "baseline") {
                    baseline_via.entry(k).or_insert(v);
                }
            }
        }
    }
    let mut out = Vec::new();
    for name in model.execute_clauses.keys() {
        let key = instruction_key(name);
        let privileges = isa_model::instruction_privileges(model, config, name)?;
        let mut footprint = all[&key].clone();
        let mut via = via_paths(&direct, &key, name);
        if include_baseline {
            footprint.extend(&baseline);
            for (k, v) in &baseline_via {
                via.entry(k.clone()).or_insert_with(|| v.clone());
            }
        }
        out.push(InstructionInsight {
            instruction: name.clone(),
            privileges,
            footprint,
            externals: reachable_externals(model, &direct, &key),
            via,
        });
    }
    Ok(out)
}

/// Breadth-first call paths from `root` to the first function directly
/// performing each access.
fn via_paths(direct: &DirectMap, root: &str, label: &str) -> BTreeMap<(Direction, Access), String> {
    let mut out = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    queue.push_back((root.to_string(), label.to_string()));
    seen.insert(root.to_string());
    while let Some((node, path)) = queue.pop_front() {
        let Some(entry) = direct.get(&node) else { continue };
        for dir in [Direction::Read, Direction::Write] {
            for a in entry.footprint.accesses(dir) {
                out.entry((dir, a.clone())).or_insert_with(|| path.clone());
            }
        }
        for c in &entry.callees {
            if direct.contains_key(c) && seen.insert(c.clone()) {
                queue.push_back((c.clone(), format!("{path}>{c}")));
            }
        }
    }
    out
}

fn reachable_externals(model: &SailModel, direct: &DirectMap, root: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let mut stack = vec![root.to_string()];
    while let Some(n) = stack.pop() {
        if !seen.insert(n.clone()) {
            continue;
        }
        if let Some(e) = direct.get(&n) {
            for c in &e.callees {
                if model.functions.contains_key(c) {
                    stack.push(c.clone());
                } else {
                    out.insert(c.clone());
                }
            }
        }
    }
    out
}

pub const INSIGHTS_HEADER: [&str; 7] = [
    "instruction",
    "privileges",
    "register",
    "field",
    "direction",
    "access",
    "via",
];

pub fn write_insights_csv<W: Write>(insights: &[InstructionInsight], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(INSIGHTS_HEADER)?;
    for ins in insights {
        let privileges = join_modes(&ins.privileges);
        for dir in [Direction::Read, Direction::Write] {
            for a in ins.footprint.accesses(dir) {
                let via = ins.via.get(&(dir, a.clone())).map_or("", String::as_str);
                w.write_record([
                    ins.instruction.as_str(),
                    privileges.as_str(),
                    a.state.register.as_str(),
                    a.state.field.as_deref().unwrap_or(""),
                    &dir.to_string(),
                    &a.kind.to_string(),
                    via,
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
