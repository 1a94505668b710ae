use std::path::PathBuf;

use super::*;
use crate::classifier::{analyze, classify_all};
use crate::isa_model::Isa;
use crate::testutil::{bundled, riscv};

fn known(cfg: &BackendConfig) -> BTreeSet<StateRef> {
    Isa::new(bundled(), cfg).states.into_iter().map(|s| s.state).collect()
}

fn report(cfg: &BackendConfig, src: &str, dst: &str) -> SensitivityReport {
    let isa = Isa::new(bundled(), cfg);
    let (_, m) = analyze(&isa, false).unwrap();
    classify_all(&cfg.mode(src).unwrap(), &cfg.mode(dst).unwrap(), &m)
}

fn fixture(cfg: &BackendConfig, name: &str) -> SwapManifest {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures/audit")
        .join(name);
    parse_manifest(&std::fs::read_to_string(p).unwrap(), cfg, &known(cfg)).unwrap()
}

fn flagged(r: &AuditReport, v: Verdict) -> BTreeSet<String> {
    r.with_verdict(v).map(|f| f.state.register.clone()).collect()
}

fn set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn bank(prefix: &str) -> Vec<String> {
    (0..32).map(|i| format!("{prefix}{i}")).collect()
}

#[test]
fn single_line() {
    let m = parse_manifest("senvcfg, none\n", riscv(), &known(riscv())).unwrap();
    assert_eq!(m.entries[&StateRef::whole("senvcfg")].action, SwapAction::None);
    assert!(m.unknown.is_empty());
    assert!(m.pair.is_none());
}

#[test]
fn ranges_and_provenance() {
    let m = parse_manifest("f0..f31, swap_conditional, vm.rs:88\n", riscv(), &known(riscv())).unwrap();
    assert_eq!(m.entries.len(), 32);
    let e = &m.entries[&StateRef::whole("f17")];
    assert_eq!(e.action, SwapAction::SwapConditional);
    assert_eq!(e.provenance.as_deref(), Some("vm.rs:88"));
}

#[test]
fn manifest_errors() {
    let k = known(riscv());
    assert_eq!(
        parse_manifest("# c\nsepc, stash\n", riscv(), &k),
        Err(AuditError::UnknownAction {
            line: 2,
            action: "stash".into()
        })
    );
    assert!(matches!(
        parse_manifest("sepc\n", riscv(), &k),
        Err(AuditError::MalformedLine { line: 1, .. })
    ));
    assert!(matches!(
        parse_manifest("f3..g4, swap\n", riscv(), &k),
        Err(AuditError::MalformedLine { .. })
    ));
    assert!(matches!(
        parse_manifest("sepc, swap\nsepc, none\n", riscv(), &k),
        Err(AuditError::MalformedLine { line: 2, .. })
    ));
    assert!(matches!(
        parse_manifest("@pair User\n", riscv(), &k),
        Err(AuditError::MalformedLine { .. })
    ));
    assert!(matches!(
        parse_manifest("@pair VS, VS\n", riscv(), &k),
        Err(AuditError::UnknownMode { line: 1, .. })
    ));
    let m = parse_manifest("bogus_csr, swap\n", riscv(), &k).unwrap();
    assert!(m.unknown.contains(&StateRef::whole("bogus_csr")));
}

#[test]
fn verdict_table() {
    use SwapAction::*;
    assert_eq!(verdict(true, None), Verdict::MishandledNotSwapped);
    assert_eq!(verdict(true, SwapConditional), Verdict::TimingChannelConditional);
    assert_eq!(verdict(true, Swap), Verdict::Ok);
    assert_eq!(verdict(true, Clear), Verdict::Ok);
    assert_eq!(verdict(false, None), Verdict::Ok);
    assert_eq!(verdict(false, Swap), Verdict::RedundantSwap);
    assert_eq!(verdict(false, Clear), Verdict::RedundantSwap);
    assert_eq!(verdict(false, SwapConditional), Verdict::RedundantSwap);
}

#[test]
fn keystone() {
    let m = fixture(riscv(), "keystone.csv");
    assert!(!m.entries.contains_key(&StateRef::whole("fcsr")));
    let r = audit(&m, &report(riscv(), "S", "S")).unwrap();
    let mut want = set(&["senvcfg", "fcsr", "vl", "vtype", "vstart", "vcsr"]);
    want.extend(bank("f"));
    want.extend(bank("v"));
    assert_eq!(flagged(&r, Verdict::MishandledNotSwapped), want);
    let fcsr = r.get(&StateRef::whole("fcsr")).unwrap();
    assert!(fcsr.classes.contains(&AttackClass::ComputationalIntegrity));
    assert_eq!(r.count(Verdict::TimingChannelConditional), 0);
    assert_eq!(r.count(Verdict::RedundantSwap), 0);
    assert!(r.unknown_states.is_empty());
}

#[test]
fn komodo() {
    let r = audit(&fixture(riscv(), "komodo.csv"), &report(riscv(), "S", "S")).unwrap();
    let mishandled = flagged(&r, Verdict::MishandledNotSwapped);
    assert!(mishandled.contains("senvcfg"));
    assert!(r.get(&StateRef::field("senvcfg", "FIOM")).unwrap().verdict == Verdict::MishandledNotSwapped);
}

#[test]
fn salus() {
    let cfg = BackendConfig::riscv_hypervisor();
    let r = audit(&fixture(&cfg, "salus.csv"), &report(&cfg, "VS", "VS")).unwrap();
    assert_eq!(r.count(Verdict::MishandledNotSwapped), 0);
    let mut want = set(&["fcsr", "vl", "vtype", "vstart", "vcsr"]);
    want.extend(bank("f"));
    want.extend(bank("v"));
    assert_eq!(flagged(&r, Verdict::TimingChannelConditional), want);
}

#[test]
fn ace() {
    let cfg = BackendConfig::riscv_hypervisor();
    let r = audit(&fixture(&cfg, "ace.csv"), &report(&cfg, "HS", "VS")).unwrap();
    assert_eq!(r.count(Verdict::MishandledNotSwapped), 0);
    assert_eq!(r.count(Verdict::TimingChannelConditional), 0);
    assert_eq!(
        flagged(&r, Verdict::RedundantSwap),
        set(&["mtval", "mtval2", "htval", "htinst"])
    );
}

#[test]
fn pair_mismatch() {
    let cfg = BackendConfig::riscv_hypervisor();
    let m = fixture(&cfg, "ace.csv");
    assert!(matches!(
        audit(&m, &report(&cfg, "VS", "VS")),
        Err(AuditError::PairMismatch { .. })
    ));
}

#[test]
fn invariants() {
    let cfg = riscv();
    let rep = report(cfg, "S", "S");
    let r = audit(&fixture(cfg, "keystone.csv"), &rep).unwrap();
    for e in rep.entries.iter().filter(|e| e.sensitive) {
        assert_eq!(r.findings.iter().filter(|f| f.state == e.state).count(), 1);
    }
    for f in &r.findings {
        match f.verdict {
            Verdict::Ok => assert!(
                (f.sensitive && matches!(f.action, SwapAction::Swap | SwapAction::Clear))
                    || (!f.sensitive && f.action == SwapAction::None)
            ),
            Verdict::MishandledNotSwapped => assert!(f.sensitive && f.action == SwapAction::None),
            Verdict::TimingChannelConditional => assert!(f.sensitive && f.action == SwapAction::SwapConditional),
            Verdict::RedundantSwap => assert!(!f.sensitive && f.action != SwapAction::None),
        }
    }
    assert_eq!(r.summary.values().sum::<usize>(), r.findings.len());
    assert_eq!(audit(&fixture(cfg, "keystone.csv"), &rep).unwrap(), r);
}

#[test]
fn manifest_only_states() {
    let r = audit(
        &parse_manifest("ghost, swap\n", riscv(), &known(riscv())).unwrap(),
        &report(riscv(), "U", "U"),
    )
    .unwrap();
    let g = r.get(&StateRef::whole("ghost")).unwrap();
    assert!(!g.in_report);
    assert_eq!(g.verdict, Verdict::RedundantSwap);
    assert!(r.unknown_states.contains(&StateRef::whole("ghost")));
}

#[test]
fn text_and_json() {
    let r = audit(&fixture(riscv(), "keystone.csv"), &report(riscv(), "S", "S")).unwrap();
    let mut buf = Vec::new();
    write_audit_text(&r, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("source: Supervisor  target: Supervisor\n"));
    assert!(text
        .lines()
        .any(|l| l.starts_with("senvcfg ") && l.contains("mishandled_not_swapped")));
    assert!(!text.lines().any(|l| l.starts_with("sepc ")));
    let mut buf = Vec::new();
    write_audit_json(&r, &mut buf).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    assert!(v["summary"]["mishandled_not_swapped"].as_u64().unwrap() > 0);
}
