//! One PASS/FAIL line per acceptance criterion. The lines are written
//! straight to stderr so they show up without `--nocapture`.

use std::io::Write;
use std::sync::OnceLock;

use bhs_core::adversary::AdversarySpec;
use bhs_core::config::{RunSpec, SweepConfig};
use bhs_core::harness::{fuzz_cells, run, simulate, sweep, SweepSummary};
use bhs_core::kernel::{AgentId, EventKind, Trace, TraceEvent, TraceHeader, TRACE_FORMAT};
use bhs_core::model_check::check_all;
use bhs_core::protocols::{ProtoState, Protocol, Reading};
use bhs_core::ring::{Direction, RingConfig};
use bhs_core::verifier::{check_phase1_invariants, log_log_fit, Invariant};

const ADVERSARIES: &str = "static, frontier_blocker, frontier_blocker(release=n), \
                           pendulum_staller, random(p=0.5), random(p=0.9)";

fn line(k: u32, ok: bool, what: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    writeln!(err, "criterion {k}: {verdict} {what}").unwrap();
}

fn c1_config(reading: Reading) -> SweepConfig {
    SweepConfig {
        ns: "4..16".into(),
        bh: "all".into(),
        placements: 20,
        adversaries: ADVERSARIES.into(),
        seeds: "0..49".into(),
        reference: reading,
        ..SweepConfig::default()
    }
}

fn c1(reading: Reading) -> &'static SweepSummary {
    static RA: OnceLock<SweepSummary> = OnceLock::new();
    static LM: OnceLock<SweepSummary> = OnceLock::new();
    let cell = match reading {
        Reading::RoleAssignment => &RA,
        Reading::LastMeeting => &LM,
    };
    cell.get_or_init(|| sweep(&c1_config(reading)).expect("sweep runs"))
}

fn count(s: &SweepSummary, prefix: &str) -> usize {
    s.failures
        .iter()
        .flat_map(|f| f.violations.iter())
        .filter(|v| v.starts_with(prefix))
        .count()
}

fn errors(s: &SweepSummary) -> usize {
    s.failures.iter().filter(|f| f.error.is_some()).count()
}

#[test]
fn criterion_1_soundness() {
    let s = c1(Reading::default());
    let wrong = count(s, "soundness");
    let ok = wrong == 0 && errors(s) == 0 && s.runs > 200_000;
    line(
        1,
        ok,
        &format!(
            "runs={} wrong_reports={wrong} kernel_errors={}",
            s.runs,
            errors(s)
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_2_liveness_and_bounds() {
    let s = c1(Reading::default());
    let live = count(s, "liveness");
    let moves = count(s, "move_bound");
    let ok = live == 0 && moves == 0 && s.solved == s.runs && s.max_moves <= 50 * 16 * 16;
    line(
        2,
        ok,
        &format!(
            "solved={}/{} liveness={live} move_bound={moves} max_moves={}",
            s.solved, s.runs, s.max_moves
        ),
    );
    assert!(ok);
}

fn blank(n: usize, bh: usize, starts: [usize; 3]) -> Trace {
    Trace::new(TraceHeader {
        format: TRACE_FORMAT,
        n,
        bh_index: bh,
        starts: starts.to_vec(),
        protocol: Protocol::GatherAndLocate,
        reading: Reading::default(),
        adversary: "synthetic".into(),
        permanent_removal: false,
        horizon: 1000,
    })
}

fn ev(round: u64, agent: Option<u8>, kind: EventKind) -> TraceEvent {
    TraceEvent {
        round,
        agent: agent.map(AgentId),
        kind,
    }
}

/// Each Phase-1 checker must fire on a trace built to break it.
fn phase1_self_tests() -> Vec<(&'static str, bool)> {
    let has = |t: &Trace, inv| {
        check_phase1_invariants(t)
            .iter()
            .any(|v| v.invariant == inv)
    };
    let round = |r| ev(r, None, EventKind::Round { missing: None });
    use Direction::Left;

    let mut deaths = blank(6, 0, [1, 2, 3]);
    deaths.events = vec![
        round(0),
        ev(
            0,
            Some(0),
            EventKind::Move {
                from: 1,
                to: 0,
                dir: Left,
            },
        ),
        ev(
            0,
            Some(1),
            EventKind::Move {
                from: 2,
                to: 1,
                dir: Left,
            },
        ),
        round(1),
        ev(
            1,
            Some(0),
            EventKind::EnterBh {
                at: 0,
                with_pebble: true,
            },
        ),
        ev(
            1,
            Some(1),
            EventKind::Move {
                from: 1,
                to: 0,
                dir: Left,
            },
        ),
        round(2),
        ev(
            2,
            Some(1),
            EventKind::EnterBh {
                at: 0,
                with_pebble: true,
            },
        ),
    ];

    // A real run with one Phase-1 death, then the marker is lifted.
    let spec = RunSpec::new(
        RingConfig::new(8, 0).unwrap(),
        [2, 4, 7],
        Protocol::GatherAndLocate,
        AdversarySpec::FrontierBlocker { release: None },
    );
    let real = simulate(&spec).unwrap().0;
    let death = real
        .events
        .iter()
        .find(|e| matches!(e.kind, EventKind::EnterBh { .. }))
        .map(|e| e.round)
        .unwrap();
    let mut lifted = real.clone();
    let end = lifted
        .events
        .iter()
        .rposition(|e| e.round == death)
        .unwrap();
    lifted
        .events
        .insert(end + 1, ev(death, Some(2), EventKind::TakePebble { at: 7 }));

    let mut late = blank(5, 0, [1, 2, 3]);
    late.events = (0..9 * 5 + 2).map(round).collect();

    let mut scattered = blank(6, 0, [1, 2, 4]);
    scattered.events.push(round(0));
    for a in 0..3 {
        for (from, to) in [
            (ProtoState::Init, ProtoState::EndPhase1),
            (ProtoState::EndPhase1, ProtoState::InitP2),
        ] {
            scattered
                .events
                .push(ev(0, Some(a), EventKind::StateChange { from, to }));
        }
    }

    vec![
        (
            "clean run passes",
            check_phase1_invariants(&real).is_empty(),
        ),
        ("two deaths", has(&deaths, Invariant::Phase1Deaths)),
        ("marker lifted", has(&lifted, Invariant::Phase1Marker)),
        ("deadline", has(&late, Invariant::Phase1Deadline)),
        ("trichotomy", has(&scattered, Invariant::Phase1Trichotomy)),
    ]
}

#[test]
fn criterion_3_phase1_invariants() {
    let s = c1(Reading::default());
    let found = [
        "phase1_deaths",
        "phase1_marker",
        "phase1_deadline",
        "phase1_trichotomy",
    ]
    .map(|p| count(s, p));
    let selfs = phase1_self_tests();
    let failed: Vec<&str> = selfs.iter().filter(|s| !s.1).map(|s| s.0).collect();
    let ok = found.iter().all(|&c| c == 0) && failed.is_empty();
    line(
        3,
        ok,
        &format!(
            "violations deaths/marker/deadline/trichotomy={found:?} self_tests={}/{} {failed:?}",
            selfs.len() - failed.len(),
            selfs.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_4_exhaustive_depth_10() {
    let r = check_all(&[4, 5], Protocol::GatherAndLocate, Reading::default(), 10);
    let ok = r.counterexamples.is_empty() && r.levels.iter().any(|l| l.depth == 10);
    line(
        4,
        ok,
        &format!(
            "instances={} raw_schedules={} distinct_states={} counterexamples={}",
            r.instances,
            r.raw_paths,
            r.states,
            r.counterexamples.len()
        ),
    );
    assert!(ok, "{:?}", r.counterexamples.first());
}

/// Worst rounds over every colocated start, BH fixed at node 0.
fn worst_rounds(n: usize, adv: &AdversarySpec) -> u64 {
    let ring = RingConfig::new(n, 0).unwrap();
    (1..n)
        .map(|v| {
            let spec = RunSpec::new(ring, [v; 3], Protocol::GatherAndLocate, adv.clone());
            let out = run(&spec).unwrap();
            assert!(out.verdict.is_clean());
            out.verdict.stats.rounds
        })
        .max()
        .unwrap()
}

#[test]
fn criterion_5_complexity_shape() {
    let ns = [8usize, 12, 16, 20, 24];
    let pts = |adv: AdversarySpec| -> Vec<(u64, u64)> {
        ns.iter()
            .map(|&n| (n as u64, worst_rounds(n, &adv)))
            .collect()
    };
    let staller = log_log_fit(&pts(AdversarySpec::PendulumStaller)).unwrap();
    let calm = log_log_fit(&pts(AdversarySpec::Static)).unwrap();
    let ok = staller.slope >= 1.7 && calm.slope <= 1.3 && staller.points.len() >= 5;
    line(
        5,
        ok,
        &format!(
            "staller slope={:.2} {:?}; static colocated slope={:.2} {:?}",
            staller.slope, staller.points, calm.slope, calm.points
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_6_pendulum_standalone() {
    let cfg = SweepConfig {
        protocol: Protocol::CautiousPendulum,
        ..c1_config(Reading::default())
    };
    let s = sweep(&cfg).unwrap();
    let ok = s.clean() && s.solved == s.runs;
    line(
        6,
        ok,
        &format!(
            "runs={} solved={} failures={} max_rounds={}",
            s.runs,
            s.solved,
            s.failures.len(),
            s.max_rounds
        ),
    );
    assert!(ok, "{:?}", s.failures.first());
}

#[test]
fn criterion_7_determinism_and_replay() {
    let mut cells = fuzz_cells(7, 150, (4, 16), Protocol::GatherAndLocate);
    cells.extend(fuzz_cells(8, 50, (4, 16), Protocol::CautiousPendulum));
    let mut identical = 0;
    let mut replayed = 0;
    for spec in &cells {
        let a = simulate(spec).unwrap().0.to_jsonl();
        let b = simulate(spec).unwrap().0;
        identical += usize::from(a == b.to_jsonl());
        let mut again = spec.clone();
        again.adversary = AdversarySpec::Schedule {
            missing: b.missing_edges(),
        };
        replayed += usize::from(simulate(&again).unwrap().0.events == b.events);
    }
    let ok = identical == cells.len() && replayed == cells.len();
    line(
        7,
        ok,
        &format!(
            "byte_identical={identical}/{0} replayed={replayed}/{0}",
            cells.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_8_reference_reading() {
    let ra = c1(Reading::RoleAssignment);
    let lm = c1(Reading::LastMeeting);
    let (wa, wl) = (count(ra, "soundness"), count(lm, "soundness"));
    let default_clean = match Reading::default() {
        Reading::RoleAssignment => wa == 0,
        Reading::LastMeeting => wl == 0,
    };
    let ok = (wa == 0 || wl == 0) && default_clean;
    line(
        8,
        ok,
        &format!(
            "role_assignment wrong_reports={wa}; last_meeting wrong_reports={wl}; default={}",
            Reading::default()
        ),
    );
    if !ok {
        let first = ra.failures.first().or(lm.failures.first()).unwrap();
        let trace = simulate(&first.spec).unwrap().0;
        panic!("counterexample:\n{}", trace.to_jsonl());
    }
}
