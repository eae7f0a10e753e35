//! Exhaustive exploration of every adversary up to a fixed depth.
//!
//! Level `d` holds the distinct world states reachable after `d` rounds.
//! States are compared exactly, except for the last round's edge set, which
//! the kernel overwrites before it is read again. Each state keeps the first
//! schedule that reached it so that a violation comes with a replayable
//! counterexample.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::AdversaryStrategy;
use crate::config::{all_placements, format_schedule};
use crate::kernel::WorldState;
use crate::protocols::{Family, Protocol, Reading};
use crate::ring::{EdgeId, RingConfig, RoundEdgeSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub depth: usize,
    /// Schedules of this length, `(n + 1)^depth`.
    pub raw: u128,
    /// Distinct states after deduplication.
    pub distinct: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub n: usize,
    pub bh_index: usize,
    pub starts: [usize; 3],
    pub schedule: String,
    pub problem: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CheckReport {
    pub instances: u64,
    pub states: u64,
    pub raw_paths: u128,
    pub levels: Vec<LevelStats>,
    pub counterexamples: Vec<Counterexample>,
}

impl CheckReport {
    fn absorb(&mut self, other: CheckReport) {
        self.instances += other.instances;
        self.states += other.states;
        self.raw_paths += other.raw_paths;
        for l in other.levels {
            match self.levels.iter_mut().find(|x| x.depth == l.depth) {
                Some(x) => {
                    x.raw += l.raw;
                    x.distinct += l.distinct;
                }
                None => self.levels.push(l),
            }
        }
        self.counterexamples.extend(other.counterexamples);
    }
}

struct Fixed(RoundEdgeSet);

impl AdversaryStrategy for Fixed {
    fn name(&self) -> String {
        "fixed".into()
    }

    fn choose(&mut self, _: &WorldState) -> RoundEdgeSet {
        self.0
    }
}

/// Safety problems visible in a single state.
pub fn state_problems(w: &WorldState) -> Vec<String> {
    let mut out = Vec::new();
    let bh = w.cfg.bh_index();
    for a in &w.agents {
        if a.terminated {
            let r = a.resolved_report(&w.cfg);
            if r != Some(bh) {
                out.push(format!("{} terminated reporting {r:?}", a.id));
            }
        }
    }
    let held = w
        .agents
        .iter()
        .filter(|a| a.alive && a.holds_pebble)
        .count();
    let total = held + w.pebbles_on_nodes() + w.destroyed_pebbles as usize;
    if total != 3 {
        out.push(format!("{total} pebbles accounted for"));
    }
    let p1_dead = w
        .agents
        .iter()
        .filter(|a| !a.alive && a.proto_state.family() == Family::Phase1)
        .count();
    if p1_dead > 1 {
        out.push(format!("{p1_dead} agents died in Phase 1"));
    }
    out
}

fn key(w: &WorldState) -> WorldState {
    let mut k = w.clone();
    k.edges = RoundEdgeSet::ALL_PRESENT;
    k
}

/// Explores one instance to `depth` rounds.
pub fn check_instance(
    cfg: RingConfig,
    starts: [usize; 3],
    protocol: Protocol,
    reading: Reading,
    depth: usize,
) -> CheckReport {
    let n = cfg.n();
    let mut report = CheckReport {
        instances: 1,
        ..CheckReport::default()
    };
    let cex = |schedule: &[Option<usize>], problem: String| Counterexample {
        n,
        bh_index: cfg.bh_index(),
        starts,
        schedule: format_schedule(schedule),
        problem,
    };
    let world = match WorldState::new(cfg, &starts, protocol, reading) {
        Ok(w) => w,
        Err(e) => {
            report.counterexamples.push(cex(&[], e.to_string()));
            return report;
        }
    };
    let mut level: HashMap<WorldState, Vec<Option<usize>>> = HashMap::new();
    level.insert(key(&world), Vec::new());
    let choices: Vec<Option<usize>> = std::iter::once(None).chain((0..n).map(Some)).collect();
    for d in 1..=depth {
        let mut next: HashMap<WorldState, Vec<Option<usize>>> = HashMap::new();
        for (w, sched) in &level {
            if w.quiescent() {
                continue;
            }
            for &c in &choices {
                let mut s = w.clone();
                let mut adv = Fixed(RoundEdgeSet {
                    missing: c.map(EdgeId),
                });
                let mut path = sched.clone();
                path.push(c);
                if let Err(e) = s.step(&mut adv) {
                    report.counterexamples.push(cex(&path, e.to_string()));
                    continue;
                }
                let k = key(&s);
                if next.contains_key(&k) {
                    continue;
                }
                for p in state_problems(&s) {
                    report.counterexamples.push(cex(&path, p));
                }
                next.insert(k, path);
            }
        }
        report.raw_paths += (n as u128 + 1).pow(d as u32);
        report.levels.push(LevelStats {
            depth: d,
            raw: (n as u128 + 1).pow(d as u32),
            distinct: next.len() as u64,
        });
        report.states += next.len() as u64;
        if next.is_empty() {
            break;
        }
        level = next;
    }
    report
}

/// Every black-hole position and every placement for each `n`.
pub fn check_all(ns: &[usize], protocol: Protocol, reading: Reading, depth: usize) -> CheckReport {
    let mut instances = Vec::new();
    for &n in ns {
        for bh in 0..n {
            let cfg = RingConfig::new(n, bh).expect("n >= 4");
            let starts: Vec<[usize; 3]> = match protocol {
                Protocol::GatherAndLocate => all_placements(&cfg),
                Protocol::CautiousPendulum => (0..n).filter(|&v| v != bh).map(|v| [v; 3]).collect(),
            };
            instances.extend(starts.into_iter().map(|s| (cfg, s)));
        }
    }
    instances
        .into_par_iter()
        .map(|(cfg, s)| check_instance(cfg, s, protocol, reading, depth))
        .reduce(CheckReport::default, |mut a, b| {
            a.absorb(b);
            a
        })
}
