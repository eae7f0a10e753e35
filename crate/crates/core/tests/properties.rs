mod common;

use bhs_core::adversary::AdversarySpec;
use bhs_core::config::{format_schedule, parse_schedule, RunSpec};
use bhs_core::harness::simulate;
use bhs_core::kernel::{EventKind, Trace};
use bhs_core::protocols::{Protocol, Reading};
use bhs_core::ring::RingConfig;
use bhs_core::verifier::{check_phase1_invariants, check_safety, verify, Invariant};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Instance {
    n: usize,
    bh: usize,
    starts: [usize; 3],
    protocol: Protocol,
}

fn instance() -> impl Strategy<Value = Instance> {
    (4usize..=12, any::<u64>(), any::<bool>()).prop_map(|(n, r, pendulum)| {
        let bh = (r % n as u64) as usize;
        let free: Vec<usize> = (0..n).filter(|&v| v != bh).collect();
        let pick = |k: u64| free[(k % free.len() as u64) as usize];
        if pendulum {
            let v = pick(r >> 8);
            Instance {
                n,
                bh,
                starts: [v; 3],
                protocol: Protocol::CautiousPendulum,
            }
        } else {
            let mut s = [pick(r >> 8), pick(r >> 20), pick(r >> 32)];
            // Scattered starts must be distinct; fall back to consecutive nodes.
            if s[0] == s[1] || s[1] == s[2] || s[0] == s[2] {
                s = [free[0], free[1], free[2]];
            }
            Instance {
                n,
                bh,
                starts: s,
                protocol: Protocol::GatherAndLocate,
            }
        }
    })
}

fn adversary(n: usize) -> impl Strategy<Value = AdversarySpec> {
    prop_oneof![
        Just(AdversarySpec::Static),
        Just(AdversarySpec::PendulumStaller),
        Just(AdversarySpec::FrontierBlocker { release: None }),
        (2..=2 * n as u64).prop_map(|t| AdversarySpec::FrontierBlocker { release: Some(t) }),
        (any::<u64>(), 0.0..1.0f64, any::<bool>()).prop_map(|(seed, p_block, biased)| {
            AdversarySpec::Random {
                seed,
                p_block,
                biased,
            }
        }),
        prop::collection::vec(prop::option::weighted(0.7, 0..n), 0..6 * n)
            .prop_map(|missing| AdversarySpec::Schedule { missing }),
    ]
}

fn case() -> impl Strategy<Value = (Instance, AdversarySpec)> {
    instance().prop_flat_map(|i| {
        let n = i.n;
        (Just(i), adversary(n))
    })
}

fn spec_of(i: &Instance, adv: AdversarySpec) -> RunSpec {
    RunSpec::new(
        RingConfig::new(i.n, i.bh).unwrap(),
        i.starts,
        i.protocol,
        adv,
    )
}

fn trace_of(spec: &RunSpec) -> Trace {
    simulate(spec).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_run_is_safe_and_solved((i, adv) in case()) {
        let spec = spec_of(&i, adv);
        let t = trace_of(&spec);
        prop_assert!(check_safety(&t).is_empty(), "{:?}", check_safety(&t));
        prop_assert!(check_phase1_invariants(&t).is_empty());
        let v = verify(&t, spec.horizon, spec.bound_factor);
        prop_assert!(v.is_clean(), "{:?}", v.violations);
        prop_assert!(v.solved);
        // At most one Phase-1 death, and never more than two deaths in all.
        prop_assert!(v.stats.phase1_deaths <= 1);
        prop_assert!(v.stats.deaths <= 2);
    }

    #[test]
    fn runs_are_deterministic((i, adv) in case()) {
        let spec = spec_of(&i, adv);
        prop_assert_eq!(trace_of(&spec), trace_of(&spec));
    }

    #[test]
    fn jsonl_round_trips((i, adv) in case()) {
        let t = trace_of(&spec_of(&i, adv));
        let back = Trace::from_jsonl(&t.to_jsonl()).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn recorded_schedules_replay_identically((i, adv) in case()) {
        let t = trace_of(&spec_of(&i, adv));
        let missing = t.missing_edges();
        let text = format_schedule(&missing);
        prop_assert_eq!(&parse_schedule(&text).unwrap(), &missing);
        let replay = trace_of(&spec_of(&i, AdversarySpec::Schedule { missing }));
        prop_assert_eq!(replay.events, t.events);
    }

    #[test]
    fn one_edge_at_most_per_round((i, adv) in case()) {
        let t = trace_of(&spec_of(&i, adv));
        let rounds = t.events.iter().filter(|e| matches!(e.kind, EventKind::Round { .. })).count();
        prop_assert_eq!(rounds as u64, t.rounds());
        for e in &t.events {
            if let EventKind::Round { missing: Some(m) } = e.kind {
                prop_assert!(m < i.n);
            }
        }
    }

    #[test]
    fn readings_agree_until_a_failed_report((i, adv) in case()) {
        let mut a = spec_of(&i, adv);
        a.reading = Reading::RoleAssignment;
        let mut b = a.clone();
        b.reading = Reading::LastMeeting;
        let (ta, tb) = (trace_of(&a), trace_of(&b));
        let first_r = ta.events.iter().position(|e| matches!(e.kind, EventKind::Terminate { .. }));
        let cut = first_r.unwrap_or(ta.events.len());
        prop_assert_eq!(&ta.events[..cut.min(tb.events.len())], &tb.events[..cut.min(tb.events.len())]);
    }
}

#[test]
fn a_corrupted_trace_is_caught() {
    let mut t = trace_of(&common::spec(7, 2, [3, 4, 6], AdversarySpec::Static));
    for e in t.events.iter_mut() {
        if let EventKind::Terminate { report, .. } = &mut e.kind {
            *report = (*report + 1) % 7;
        }
    }
    let v = verify(&t, t.header.horizon, 50);
    assert!(v.has(Invariant::Soundness));
}
