#![allow(dead_code)]

use bhs_core::adversary::AdversarySpec;
use bhs_core::config::RunSpec;
use bhs_core::harness::{run, RunOutcome};
use bhs_core::kernel::{AgentId, EventKind, TraceEvent};
use bhs_core::protocols::Protocol;
use bhs_core::ring::RingConfig;

pub fn spec(n: usize, bh: usize, starts: [usize; 3], adv: AdversarySpec) -> RunSpec {
    RunSpec::new(
        RingConfig::new(n, bh).unwrap(),
        starts,
        Protocol::GatherAndLocate,
        adv,
    )
}

pub fn pendulum(n: usize, bh: usize, at: usize, adv: AdversarySpec) -> RunSpec {
    RunSpec::new(
        RingConfig::new(n, bh).unwrap(),
        [at; 3],
        Protocol::CautiousPendulum,
        adv,
    )
}

pub fn go(spec: &RunSpec) -> RunOutcome {
    run(spec).expect("simulation runs")
}

pub fn events_of(out: &RunOutcome, id: u8) -> impl Iterator<Item = &TraceEvent> {
    out.trace
        .events
        .iter()
        .filter(move |e| e.agent == Some(AgentId(id)))
}

pub fn death_round(out: &RunOutcome, id: u8) -> Option<u64> {
    events_of(out, id)
        .find(|e| matches!(e.kind, EventKind::EnterBh { .. }))
        .map(|e| e.round)
}

pub fn schedule(s: &str) -> AdversarySpec {
    AdversarySpec::Schedule {
        missing: bhs_core::config::parse_schedule(s).unwrap(),
    }
}
