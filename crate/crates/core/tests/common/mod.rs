#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use regex::Regex;

use sailscan::footprint::{Access, DirectEntry, DirectMap, Footprint};
use sailscan::sail_syntax::{parse_corpus, SailModel};
use sailscan::{AccessKind, Direction, StateRef};

pub fn bundled() -> SailModel {
    parse_corpus(&[sailscan::bundled_corpus_dir()]).expect("bundled corpus parses")
}

pub fn fixture(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(rel)
}

/// Union of direct footprints over everything reachable, found by a
/// depth-first search from each node separately.
pub fn closure_oracle(direct: &DirectMap) -> BTreeMap<String, Footprint> {
    let mut out = BTreeMap::new();
    for root in direct.keys() {
        let mut seen = BTreeSet::new();
        let mut stack = vec![root.clone()];
        let mut fp = Footprint::default();
        while let Some(n) = stack.pop() {
            if !seen.insert(n.clone()) {
                continue;
            }
            if let Some(e) = direct.get(&n) {
                for a in &e.footprint.reads {
                    fp.reads.insert(a.clone());
                }
                for a in &e.footprint.writes {
                    fp.writes.insert(a.clone());
                }
                stack.extend(e.callees.iter().cloned());
            }
        }
        out.insert(root.clone(), fp);
    }
    out
}

/// A call graph with up to `max_nodes` nodes, random edges (cycles and
/// self loops included), a few dangling callees and random accesses.
pub fn random_graph(rng: &mut StdRng, max_nodes: usize) -> DirectMap {
    let n = rng.gen_range(1..=max_nodes);
    let mut g = DirectMap::new();
    for i in 0..n {
        let mut e = DirectEntry::default();
        for _ in 0..rng.gen_range(0..4) {
            let state = StateRef::whole(format!("r{}", rng.gen_range(0..12)));
            let kind = if rng.gen_bool(0.5) {
                AccessKind::Explicit
            } else {
                AccessKind::Implicit
            };
            let dir = if rng.gen_bool(0.5) {
                Direction::Read
            } else {
                Direction::Write
            };
            e.footprint.add(dir, Access::new(state, kind));
        }
        for _ in 0..rng.gen_range(0..4) {
            if rng.gen_bool(0.1) {
                e.callees.insert(format!("ext{}", rng.gen_range(0..3)));
            } else {
                e.callees.insert(format!("n{}", rng.gen_range(0..n)));
            }
        }
        g.insert(format!("n{i}"), e);
    }
    g
}

pub fn seeded(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// The bundled corpus copied until it reaches `min_lines`; every
/// non-scattered definition is renamed per copy so copies stay disjoint.
pub fn scaled_corpus(min_lines: usize) -> Vec<(String, String)> {
    let model = bundled();
    let mut names: BTreeSet<String> = BTreeSet::new();
    names.extend(model.registers.keys().cloned());
    names.extend(model.bitfields.keys().cloned());
    names.extend(model.execute_clauses.keys().cloned());
    names.extend(model.type_aliases.keys().cloned());
    names.extend(model.enums.keys().cloned());
    names.extend(
        model
            .functions
            .iter()
            .filter(|(_, f)| !f.scattered)
            .map(|(k, _)| k.clone()),
    );
    let ident = Regex::new(r"\b[A-Za-z_][A-Za-z0-9_]*\b").unwrap();
    let mut sources = Vec::new();
    for p in sailscan::sail_syntax::collect_sail_files(&[sailscan::bundled_corpus_dir()]).unwrap() {
        sources.push((
            p.file_name().unwrap().to_string_lossy().to_string(),
            std::fs::read_to_string(&p).unwrap(),
        ));
    }
    let per_copy: usize = sources.iter().map(|(_, t)| t.lines().count()).sum();
    let copies = min_lines.div_ceil(per_copy).max(1);
    let mut out = Vec::new();
    for k in 0..copies {
        for (name, text) in &sources {
            let renamed = ident.replace_all(text, |c: &regex::Captures| {
                let id = &c[0];
                if k > 0 && names.contains(id) {
                    format!("{id}_c{k}")
                } else {
                    id.to_string()
                }
            });
            out.push((format!("copy{k}/{name}"), renamed.into_owned()));
        }
    }
    out
}
