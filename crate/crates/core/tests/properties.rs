mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use sailscan::audit::{self, SwapAction, SwapEntry, SwapManifest, Verdict};
use sailscan::classifier::{self, AccessFlags, AccessMatrix};
use sailscan::footprint::{propagate, Access, DirectMap, Footprint};
use sailscan::isa_model::{BackendConfig, PrivilegeMode};
use sailscan::{AccessKind, Direction, StateInfo, StateKind, StateRef};

fn modes() -> Vec<PrivilegeMode> {
    BackendConfig::riscv().modes
}

fn small_states() -> Vec<StateInfo> {
    let mk = |s: StateRef, kind| StateInfo {
        state: s,
        width_bits: 8,
        kind,
    };
    vec![
        mk(StateRef::whole("x1"), StateKind::Gpr),
        mk(StateRef::whole("r"), StateKind::Csr),
        mk(StateRef::field("r", "A"), StateKind::Csr),
        mk(StateRef::field("r", "B"), StateKind::Csr),
        mk(StateRef::whole("q"), StateKind::Internal),
        mk(StateRef::whole("f1"), StateKind::Fpr),
    ]
}

fn flags(bits: u8) -> AccessFlags {
    AccessFlags {
        explicit_read: bits & 1 != 0,
        explicit_write: bits & 2 != 0,
        implicit_read: bits & 4 != 0,
        implicit_write: bits & 8 != 0,
        derived_read: false,
        derived_write: false,
    }
}

/// A matrix over `small_states` filled from `bits`, one nibble per cell.
fn matrix(bits: &[u8]) -> AccessMatrix {
    let ms = modes();
    let ss = small_states();
    let mut m = AccessMatrix::new(&ms, &ss);
    let mut it = bits.iter().cycle();
    for mode in &ms {
        for s in &ss {
            m.set(mode, &s.state, flags(*it.next().unwrap() & 0xf));
        }
    }
    m
}

fn union(a: &AccessFlags, b: &AccessFlags) -> AccessFlags {
    AccessFlags {
        explicit_read: a.explicit_read || b.explicit_read,
        explicit_write: a.explicit_write || b.explicit_write,
        implicit_read: a.implicit_read || b.implicit_read,
        implicit_write: a.implicit_write || b.implicit_write,
        derived_read: a.derived_read || b.derived_read,
        derived_write: a.derived_write || b.derived_write,
    }
}

fn action(i: u8) -> SwapAction {
    [
        SwapAction::Swap,
        SwapAction::SwapConditional,
        SwapAction::Clear,
        SwapAction::None,
    ][i as usize % 4]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn propagate_matches_closure(seed in any::<u64>()) {
        let g = common::random_graph(&mut common::seeded(seed), 16);
        prop_assert_eq!(propagate(&g), common::closure_oracle(&g));
    }

    #[test]
    fn propagate_is_idempotent(seed in any::<u64>()) {
        let g = common::random_graph(&mut common::seeded(seed), 16);
        let once = propagate(&g);
        let mut g2: DirectMap = g.clone();
        for (k, e) in g2.iter_mut() {
            e.footprint = once[k].clone();
        }
        prop_assert_eq!(propagate(&g2), once);
    }

    #[test]
    fn adding_an_access_only_grows_footprints(seed in any::<u64>(), node in any::<prop::sample::Index>(), reg in 0u8..20, write in any::<bool>()) {
        let g = common::random_graph(&mut common::seeded(seed), 16);
        let before = propagate(&g);
        let mut g2 = g.clone();
        let key = node.get(&g.keys().cloned().collect::<Vec<_>>()).clone();
        let dir = if write { Direction::Write } else { Direction::Read };
        g2.get_mut(&key).unwrap().footprint.add(dir, Access::new(StateRef::whole(format!("r{reg}")), AccessKind::Explicit));
        let after = propagate(&g2);
        for (k, fp) in &before {
            prop_assert!(after[k].is_superset(fp));
        }
    }

    #[test]
    fn footprint_superset_is_reflexive_and_extend_is_union(a in prop::collection::vec((0u8..8, any::<bool>()), 0..10), b in prop::collection::vec((0u8..8, any::<bool>()), 0..10)) {
        let build = |v: &[(u8, bool)]| {
            let mut f = Footprint::default();
            for (r, w) in v {
                let dir = if *w { Direction::Write } else { Direction::Read };
                f.add(dir, Access::new(StateRef::whole(format!("r{r}")), AccessKind::Implicit));
            }
            f
        };
        let (fa, fb) = (build(&a), build(&b));
        let mut u = fa.clone();
        u.extend(&fb);
        prop_assert!(u.is_superset(&fa) && u.is_superset(&fb) && fa.is_superset(&fa));
        prop_assert!(!u.extend(&fb));
    }

    #[test]
    fn more_access_never_removes_sensitivity(base in prop::collection::vec(any::<u8>(), 1..64), extra in prop::collection::vec(any::<u8>(), 1..64), si in 0usize..5, ti in 0usize..5) {
        let ms = modes();
        let (src, dst) = (&ms[si % ms.len()], &ms[ti % ms.len()]);
        let m1 = matrix(&base);
        let m_extra = matrix(&extra);
        let mut m2 = m1.clone();
        for mode in &ms {
            for s in small_states() {
                let f = union(&m1.get(mode, &s.state), &m_extra.get(mode, &s.state));
                m2.set(mode, &s.state, f);
            }
        }
        let r1 = classifier::classify_all(src, dst, &m1);
        let r2 = classifier::classify_all(src, dst, &m2);
        for e in &r1.entries {
            let e2 = r2.get(&e.state).unwrap();
            prop_assert!(e2.classes.is_superset(&e.classes), "{} lost classes", e.state);
        }
    }

    #[test]
    fn gprs_are_always_fully_sensitive(bits in prop::collection::vec(any::<u8>(), 1..64), si in 0usize..5, ti in 0usize..5) {
        let ms = modes();
        let r = classifier::classify_all(&ms[si % ms.len()], &ms[ti % ms.len()], &matrix(&bits));
        prop_assert_eq!(r.get(&StateRef::whole("x1")).unwrap().classes.len(), 3);
    }

    #[test]
    fn sensitive_iff_some_class(bits in prop::collection::vec(any::<u8>(), 1..64), si in 0usize..5, ti in 0usize..5) {
        let ms = modes();
        let r = classifier::classify_all(&ms[si % ms.len()], &ms[ti % ms.len()], &matrix(&bits));
        for e in &r.entries {
            prop_assert_eq!(e.sensitive, !e.classes.is_empty());
        }
        prop_assert_eq!(r.summary.sensitive_states, r.entries.iter().filter(|e| e.sensitive).count());
    }

    #[test]
    fn audit_covers_every_state_once(bits in prop::collection::vec(any::<u8>(), 1..64), acts in prop::collection::vec(prop::option::of(0u8..4), 6)) {
        let ms = modes();
        let report = classifier::classify_all(&ms[1], &ms[1], &matrix(&bits));
        let mut manifest = SwapManifest::default();
        for (s, a) in small_states().iter().zip(&acts) {
            if let Some(a) = a {
                manifest.entries.insert(s.state.clone(), SwapEntry { action: action(*a), provenance: None, line: 1 });
            }
        }
        let audited = audit::audit(&manifest, &report).unwrap();
        let states: Vec<&StateRef> = audited.findings.iter().map(|f| &f.state).collect();
        let unique: BTreeSet<&StateRef> = states.iter().copied().collect();
        prop_assert_eq!(states.len(), unique.len());
        prop_assert_eq!(unique.len(), small_states().len());
        prop_assert_eq!(audited.summary.values().sum::<usize>(), audited.findings.len());
        for f in &audited.findings {
            let sens = report.get(&f.state).unwrap().sensitive;
            prop_assert_eq!(f.sensitive, sens);
            prop_assert_eq!(f.verdict, audit::verdict(sens, f.action));
            if f.verdict == Verdict::Ok && sens {
                prop_assert!(matches!(f.action, SwapAction::Swap | SwapAction::Clear));
            }
            if f.verdict == Verdict::MishandledNotSwapped {
                prop_assert!(sens && f.action == SwapAction::None);
            }
        }
    }
}
