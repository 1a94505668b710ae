mod common;

use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;

use sailscan::isa_model::{BackendConfig, Isa};
use sailscan::{StateKind, StateRef};

/// State list read straight off the source text with regexes.
fn regex_states() -> BTreeSet<StateRef> {
    let reg = Regex::new(r"(?m)^register\s+(\w+)\s*:\s*(.+?)\s*$").unwrap();
    let vec = Regex::new(r"^vector\((\d+),").unwrap();
    let bf = Regex::new(r"(?s)bitfield\s+(\w+)\s*:\s*bits\(\d+\)\s*=\s*\{(.*?)\}").unwrap();
    let field = Regex::new(r"(\w+)\s*:\s*\d+").unwrap();
    let prefixes = BTreeMap::from([("Xs", "x"), ("Fs", "f"), ("Vs", "v")]);
    let mut text = String::new();
    for p in std::fs::read_dir(sailscan::bundled_corpus_dir()).unwrap() {
        text.push_str(&std::fs::read_to_string(p.unwrap().path()).unwrap());
        text.push('\n');
    }
    let bitfields: BTreeMap<String, Vec<String>> = bf
        .captures_iter(&text)
        .map(|c| {
            (
                c[1].to_string(),
                field.captures_iter(&c[2]).map(|f| f[1].to_string()).collect(),
            )
        })
        .collect();
    let mut out = BTreeSet::new();
    for c in reg.captures_iter(&text) {
        let (name, ty) = (&c[1], &c[2]);
        if let Some(v) = vec.captures(ty) {
            let n: u32 = v[1].parse().unwrap();
            let prefix = prefixes[name];
            out.extend((0..n).map(|i| StateRef::whole(format!("{prefix}{i}"))));
            continue;
        }
        out.insert(StateRef::whole(name));
        for f in bitfields.get(ty).into_iter().flatten() {
            out.insert(StateRef::field(name, f));
        }
    }
    out
}

#[test]
fn discovered_states_match_regex_scan() {
    let model = common::bundled();
    let cfg = BackendConfig::riscv();
    let isa = Isa::new(&model, &cfg);
    let found: BTreeSet<StateRef> = isa.states.iter().map(|s| s.state.clone()).collect();
    assert_eq!(found.len(), isa.states.len(), "no duplicates");
    let want = regex_states();
    let missing: Vec<_> = want.difference(&found).collect();
    let extra: Vec<_> = found.difference(&want).collect();
    assert!(
        missing.is_empty() && extra.is_empty(),
        "missing {missing:?} extra {extra:?}"
    );
}

#[test]
fn kinds_and_widths() {
    let model = common::bundled();
    let cfg = BackendConfig::riscv();
    let isa = Isa::new(&model, &cfg);
    let get = |s: &str| {
        isa.states
            .iter()
            .find(|i| i.state == StateRef::parse(s).unwrap())
            .unwrap()
    };
    assert_eq!(get("x5").kind, StateKind::Gpr);
    assert_eq!(get("f5").kind, StateKind::Fpr);
    assert_eq!(get("v5").kind, StateKind::Vector);
    assert_eq!(get("mstatus").kind, StateKind::Csr);
    assert_eq!(get("mstatus.MPP").width_bits, 2);
    assert_eq!(get("mstatus").width_bits, 64);
    assert_eq!(get("fcsr").width_bits, 32);
    assert_eq!(get("cur_privilege").kind, StateKind::Internal);
    assert_eq!(get("reservation_valid").width_bits, 1);
}

#[test]
fn every_csr_with_an_address_is_reachable_from_the_helpers() {
    let model = common::bundled();
    let cfg = BackendConfig::riscv();
    let isa = Isa::new(&model, &cfg);
    assert!(isa.diagnostics.is_empty(), "{:?}", isa.diagnostics);
}
