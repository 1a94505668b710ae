use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use super::*;
use crate::footprint::{instruction_insights, Access, Footprint, InstructionInsight};
use crate::isa_model::Isa;
use crate::state::{AccessKind, Direction};
use crate::testutil::{bundled, riscv};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/traces")
}

fn known() -> BTreeSet<StateRef> {
    Isa::new(bundled(), riscv())
        .states
        .into_iter()
        .map(|s| s.state)
        .collect()
}

fn manifest() -> Vec<ManifestEntry> {
    parse_trace_manifest(&std::fs::read_to_string(fixtures().join("manifest.csv")).unwrap()).unwrap()
}

fn bundle(file: &str) -> TraceBundle {
    let text = std::fs::read_to_string(fixtures().join(file)).unwrap();
    parse_trace(&text, file, &manifest()).unwrap()
}

fn reg_events(b: &TraceBundle) -> Vec<(EventKind, &str)> {
    b.events
        .iter()
        .filter(|e| e.kind != EventKind::Other)
        .map(|e| (e.kind, e.register.as_str()))
        .collect()
}

#[test]
fn illegal_mret_trace() {
    let b = bundle("mret_supervisor.smt2");
    assert_eq!(b.instruction, "MRET");
    assert_eq!(b.mode_context.as_deref(), Some("Supervisor"));
    let ev = reg_events(&b);
    for want in [
        (EventKind::ReadReg, "cur_privilege"),
        (EventKind::ReadReg, "medeleg"),
        (EventKind::WriteReg, "mcause"),
        (EventKind::WriteReg, "mepc"),
        (EventKind::WriteReg, "mtval"),
        (EventKind::WriteReg, "cur_privilege"),
    ] {
        assert!(ev.contains(&want), "{want:?}");
    }
    let pos = |k, r| ev.iter().position(|e| *e == (k, r)).unwrap();
    assert!(pos(EventKind::ReadReg, "cur_privilege") < pos(EventKind::ReadReg, "medeleg"));
    assert!(pos(EventKind::ReadReg, "medeleg") < pos(EventKind::WriteReg, "mcause"));
}

#[test]
fn empty_trace() {
    let m = [ManifestEntry {
        trace_file: "nop.smt2".into(),
        name: "C_NOP".into(),
        group: false,
        mode_context: None,
    }];
    let b = parse_trace("(trace)\n", "nop.smt2", &m).unwrap();
    assert!(b.events.is_empty());
    assert!(parse_trace("", "nop.smt2", &m).unwrap().events.is_empty());
}

#[test]
fn event_counts_match_line_scan() {
    for e in manifest() {
        let text = std::fs::read_to_string(fixtures().join(&e.trace_file)).unwrap();
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim_start)
            .filter(|l| !l.starts_with(';'))
            .collect();
        let reads = lines.iter().filter(|l| l.starts_with("(read-reg ")).count();
        let writes = lines.iter().filter(|l| l.starts_with("(write-reg ")).count();
        let b = bundle(&e.trace_file);
        let count = |k| b.events.iter().filter(|e| e.kind == k).count();
        assert_eq!(count(EventKind::ReadReg), reads, "{}", e.trace_file);
        assert_eq!(count(EventKind::WriteReg), writes, "{}", e.trace_file);
        assert_eq!(
            b.events.len(),
            lines.len() - 1,
            "{}: one form per line inside `(trace`",
            e.trace_file
        );
    }
}

#[test]
fn parse_errors() {
    let m = manifest();
    match parse_trace("(trace\n  (read-reg |x1| nil v0)\n", "add.smt2", &m) {
        Err(TraceError::MalformedSExpression { line, .. }) => assert_eq!(line, 1),
        other => panic!("{other:?}"),
    }
    match parse_trace("(trace\n\n  (write-reg))", "add.smt2", &m) {
        Err(TraceError::MalformedSExpression { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        parse_trace("(trace)", "other.smt2", &m),
        Err(TraceError::MissingManifestEntry(_))
    ));
    assert!(matches!(
        parse_trace_manifest("a.smt2, X, maybe\n"),
        Err(TraceError::MalformedManifestLine { line: 1, .. })
    ));
    assert!(matches!(
        parse_trace_manifest("# c\n\nonly-one-column\n"),
        Err(TraceError::MalformedManifestLine { line: 3, .. })
    ));
}

#[test]
fn field_paths() {
    let b = bundle("mret_machine.smt2");
    let mpp = b
        .events
        .iter()
        .find(|e| e.kind == EventKind::ReadReg && e.register == "mstatus")
        .unwrap();
    assert_eq!(mpp.field_path.as_deref(), Some(&["MPP".to_string()][..]));
    let cp = b.events.iter().find(|e| e.register == "cur_privilege").unwrap();
    assert_eq!(cp.field_path, None);
}

#[test]
fn mret_union_across_modes() {
    let fp = trace_footprint(&[bundle("mret_machine.smt2"), bundle("mret_supervisor.smt2")], &known()).unwrap();
    assert_eq!(fp.traces, 2);
    for s in [
        "mstatus.MIE",
        "mstatus.MPIE",
        "mstatus.MPP",
        "mstatus.MPRV",
        "mcause",
        "mepc",
        "cur_privilege",
    ] {
        assert!(fp.writes.contains(&StateRef::parse(s).unwrap()), "{s}");
    }
}

#[test]
fn single_bundle_footprint() {
    let b = bundle("mret_machine.smt2");
    let fp = trace_footprint(std::slice::from_ref(&b), &known()).unwrap();
    let mut reads = BTreeSet::new();
    let mut writes = BTreeSet::new();
    for e in &b.events {
        let s = match &e.field_path {
            Some(p) => StateRef::field(&e.register, &p[0]),
            None => StateRef::whole(&e.register),
        };
        match e.kind {
            EventKind::ReadReg => reads.insert(s),
            EventKind::WriteReg => writes.insert(s),
            EventKind::Other => false,
        };
    }
    assert_eq!(fp.reads, reads);
    assert_eq!(fp.writes, writes);
}

#[test]
fn group_union() {
    let bs: Vec<TraceBundle> = ["fadd", "fsub", "fmul", "fdiv"]
        .iter()
        .map(|n| bundle(&format!("{n}.smt2")))
        .collect();
    assert_eq!(bs[2].instruction, "fmul");
    assert_eq!(bs[2].key(), "F_BIN_TYPE");
    let fp = trace_footprint(&bs, &known()).unwrap();
    assert_eq!(fp.traces, 4);
    let fregs: BTreeSet<String> = fp
        .writes
        .iter()
        .filter(|s| s.register.starts_with('f') && s.register != "fcsr")
        .map(|s| s.register.clone())
        .collect();
    assert_eq!(fregs, ["f12", "f3", "f6", "f9"].map(String::from).into());
    assert!(matches!(
        trace_footprint(&[bs[0].clone(), bundle("sw.smt2")], &known()),
        Err(TraceError::MixedGroup { .. })
    ));
    assert!(matches!(trace_footprint(&[], &known()), Err(TraceError::NoBundles)));
}

#[test]
fn unknown_registers_are_set_aside() {
    let fp = trace_footprint(&[bundle("add.smt2")], &known()).unwrap();
    assert!(fp.unknown.contains("__isla_monomorphize_reads"));
    assert!(fp.reads.iter().all(|s| s.register != "__isla_monomorphize_reads"));
}

fn traced() -> BTreeMap<String, TraceFootprint> {
    footprints_by_key(&load_traces(&fixtures().join("manifest.csv")).unwrap(), &known()).unwrap()
}

#[test]
fn consistent_fixtures_validate() {
    let ins = instruction_insights(bundled(), riscv(), false).unwrap();
    let r = validate(&ins, &traced());
    assert!(!r.has_violations(), "{:?}", r.violations().collect::<Vec<_>>());
    for name in ["MRET", "F_BIN_TYPE", "SW", "SD", "SC", "ADD"] {
        assert_eq!(r.get(name).unwrap().status, ValidationStatus::Validated, "{name}");
    }
    assert_eq!(r.get("C_NOP").unwrap().status, ValidationStatus::MissingTrace);
    assert_eq!(r.summary.validated, 6);
    assert_eq!(r.summary.missing_trace, ins.len() - 6);
    assert!(r.unmatched_traces.is_empty());
}

#[test]
fn dropped_call_edge_is_caught() {
    let mut m = bundled().clone();
    assert!(m.remove_call_edge("clint_store", "clint_dispatch"));
    let ins = instruction_insights(&m, riscv(), false).unwrap();
    let r = validate(&ins, &traced());
    let flagged: Vec<&str> = r.violations().map(|v| v.instruction.as_str()).collect();
    assert_eq!(flagged, ["SC", "SD", "SW"]);
    for v in r.violations() {
        assert_eq!(
            v.missing,
            [MissingEntry {
                state: StateRef::field("mip", "MTIP"),
                direction: Direction::Write
            }]
        );
    }
}

fn insight(reads: &[&str], writes: &[&str]) -> InstructionInsight {
    let mut fp = Footprint::default();
    for (dir, list) in [(Direction::Read, reads), (Direction::Write, writes)] {
        for s in list {
            fp.add(dir, Access::new(StateRef::parse(s).unwrap(), AccessKind::Implicit));
        }
    }
    InstructionInsight {
        instruction: "I".into(),
        privileges: Default::default(),
        footprint: fp,
        externals: Default::default(),
        via: Default::default(),
    }
}

fn required(reads: &[&str], writes: &[&str]) -> BTreeMap<String, TraceFootprint> {
    let tf = TraceFootprint {
        reads: reads.iter().map(|s| StateRef::parse(s).unwrap()).collect(),
        writes: writes.iter().map(|s| StateRef::parse(s).unwrap()).collect(),
        unknown: BTreeSet::new(),
        traces: 1,
    };
    BTreeMap::from([("I".to_string(), tf)])
}

#[test]
fn direction_is_preserved() {
    let r = validate(&[insight(&["mip"], &[])], &required(&[], &["mip"]));
    assert_eq!(r.get("I").unwrap().status, ValidationStatus::SupersetViolation);
    assert_eq!(r.get("I").unwrap().missing[0].direction, Direction::Write);
}

#[test]
fn granularity_coverage() {
    let ok = validate(
        &[insight(&["mstatus"], &["mip.MTIP"])],
        &required(&["mstatus.MIE"], &["mip"]),
    );
    assert_eq!(ok.get("I").unwrap().status, ValidationStatus::Validated);
    let bad = validate(&[insight(&["mstatus.MIE"], &[])], &required(&["mstatus.SIE"], &[]));
    assert_eq!(bad.get("I").unwrap().status, ValidationStatus::SupersetViolation);
}

#[test]
fn more_traces_never_hide_violations() {
    let ins = [insight(&["a"], &[])];
    let mut t = required(&["b"], &[]);
    let before = validate(&ins, &t).get("I").unwrap().missing.clone();
    t.get_mut("I").unwrap().reads.insert(StateRef::whole("c"));
    let after = validate(&ins, &t).get("I").unwrap().missing.clone();
    assert!(before.iter().all(|m| after.contains(m)));
    assert_eq!(after.len(), 2);
}

#[test]
fn text_report() {
    let ins = instruction_insights(bundled(), riscv(), false).unwrap();
    let mut buf = Vec::new();
    write_validation_text(&validate(&ins, &traced()), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("validated: 6  superset_violation: 0  missing_trace: "));
    assert!(text.contains("unknown registers: __isla_monomorphize_reads"));
}
