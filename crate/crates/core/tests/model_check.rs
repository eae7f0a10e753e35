use std::collections::HashSet;

use bhs_core::adversary::{enumerate_adversaries, Schedule};
use bhs_core::config::{all_placements, SweepConfig};
use bhs_core::harness::{sweep_cells, HarnessError};
use bhs_core::kernel::WorldState;
use bhs_core::model_check::{check_all, check_instance, state_problems};
use bhs_core::protocols::{Protocol, Reading};
use bhs_core::ring::{RingConfig, RoundEdgeSet};

/// Plain enumeration: every schedule of length `d` run from scratch, no
/// sharing between prefixes. Returns the distinct end states (edges dropped)
/// and every problem seen along the way.
fn brute_force(
    cfg: RingConfig,
    starts: [usize; 3],
    protocol: Protocol,
    d: usize,
) -> (HashSet<WorldState>, Vec<String>) {
    let mut states = HashSet::new();
    let mut problems = Vec::new();
    for sched in enumerate_adversaries(&cfg, d, 1 << 24).unwrap() {
        let mut w = WorldState::new(cfg, &starts, protocol, Reading::default()).unwrap();
        let mut adv = Schedule::new(sched);
        let mut reached = true;
        for _ in 0..d {
            if w.quiescent() {
                reached = false;
                break;
            }
            w.step(&mut adv).unwrap();
            problems.extend(state_problems(&w));
        }
        if reached {
            w.edges = RoundEdgeSet::ALL_PRESENT;
            states.insert(w);
        }
    }
    (states, problems)
}

#[test]
fn deduplicated_levels_match_brute_force() {
    let cases = [
        (
            RingConfig::new(4, 0).unwrap(),
            [1, 2, 3],
            Protocol::GatherAndLocate,
        ),
        (
            RingConfig::new(5, 2).unwrap(),
            [0, 4, 1],
            Protocol::GatherAndLocate,
        ),
        (
            RingConfig::new(5, 1).unwrap(),
            [3, 3, 3],
            Protocol::CautiousPendulum,
        ),
    ];
    for (cfg, starts, protocol) in cases {
        let depth = 5;
        let report = check_instance(cfg, starts, protocol, Reading::default(), depth);
        assert!(report.counterexamples.is_empty());
        for d in 1..=depth {
            let (states, problems) = brute_force(cfg, starts, protocol, d);
            assert!(problems.is_empty(), "{problems:?}");
            let level = report.levels.iter().find(|l| l.depth == d);
            let distinct = level.map_or(0, |l| l.distinct);
            assert_eq!(
                distinct,
                states.len() as u64,
                "{cfg:?} {starts:?} depth {d}"
            );
            assert_eq!(
                level.map(|l| l.raw),
                Some((cfg.n() as u128 + 1).pow(d as u32))
            );
        }
    }
}

#[test]
fn all_n4_instances_are_clean_to_depth_8() {
    let r = check_all(&[4], Protocol::GatherAndLocate, Reading::default(), 8);
    let placements: usize = (0..4)
        .map(|bh| all_placements(&RingConfig::new(4, bh).unwrap()).len())
        .sum();
    assert_eq!(r.instances, placements as u64);
    assert!(
        r.counterexamples.is_empty(),
        "{:?}",
        r.counterexamples.first()
    );
    assert!(r.states > 0);
    assert!((r.states as u128) < r.raw_paths);
}

#[test]
fn pendulum_n5_is_clean_to_depth_8() {
    let r = check_all(&[5], Protocol::CautiousPendulum, Reading::default(), 8);
    assert_eq!(r.instances, 5 * 4);
    assert!(
        r.counterexamples.is_empty(),
        "{:?}",
        r.counterexamples.first()
    );
}

#[test]
fn oversized_grids_and_enumerations_are_refused() {
    let cfg = RingConfig::new(6, 0).unwrap();
    let err = enumerate_adversaries(&cfg, 12, 1_000_000).err().unwrap();
    assert_eq!(err.count, 7u128.pow(12));
    let sweep = SweepConfig {
        ns: "4..40".into(),
        budget: 1_000,
        ..SweepConfig::default()
    };
    assert!(matches!(
        sweep_cells(&sweep),
        Err(HarnessError::Budget { .. })
    ));
}
