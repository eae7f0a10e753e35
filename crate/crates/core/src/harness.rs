//! Running protocols to completion, sweeping parameter grids and fuzzing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AdversarySpec, AdversaryStrategy};
use crate::config::{
    all_placements, parse_range, random_starts, ConfigError, RunSpec, SweepConfig,
};
use crate::kernel::{KernelError, Trace, TraceHeader, WorldState, TRACE_FORMAT};
use crate::protocols::Protocol;
use crate::ring::RingConfig;
use crate::verifier::{verify, Verdict};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("round {round}: {source}")]
    Kernel { round: u64, source: KernelError },
    #[error("{cells} runs exceed the budget of {budget}")]
    Budget { cells: u64, budget: u64 },
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: Trace,
    pub verdict: Verdict,
    pub world: WorldState,
}

pub fn header_for(spec: &RunSpec, adversary: &dyn AdversaryStrategy) -> TraceHeader {
    TraceHeader {
        format: TRACE_FORMAT,
        n: spec.ring.n(),
        bh_index: spec.ring.bh_index(),
        starts: spec.starts.to_vec(),
        protocol: spec.protocol,
        reading: spec.reading,
        adversary: adversary.name(),
        permanent_removal: adversary.permanent_removal(),
        horizon: spec.horizon,
    }
}

/// Simulates until every agent has terminated or died, or the horizon.
pub fn simulate(spec: &RunSpec) -> Result<(Trace, WorldState), HarnessError> {
    let mut adversary = spec.adversary.build();
    simulate_with(spec, adversary.as_mut())
}

pub fn simulate_with(
    spec: &RunSpec,
    adversary: &mut dyn AdversaryStrategy,
) -> Result<(Trace, WorldState), HarnessError> {
    let mut world = WorldState::new(spec.ring, &spec.starts, spec.protocol, spec.reading)
        .map_err(|source| HarnessError::Kernel { round: 0, source })?;
    let mut trace = Trace::new(header_for(spec, adversary));
    while !world.quiescent() && world.round < spec.horizon {
        let round = world.round;
        let events = world
            .step(adversary)
            .map_err(|source| HarnessError::Kernel { round, source })?;
        trace.events.extend(events);
    }
    Ok((trace, world))
}

pub fn run(spec: &RunSpec) -> Result<RunOutcome, HarnessError> {
    let (trace, world) = simulate(spec)?;
    let verdict = verify(&trace, spec.horizon, spec.bound_factor);
    Ok(RunOutcome {
        trace,
        verdict,
        world,
    })
}

/// One sweep cell and what became of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub spec: RunSpec,
    pub solved: bool,
    pub rounds: u64,
    pub moves: u64,
    pub first_correct_termination: Option<u64>,
    pub violations: Vec<String>,
    /// Kernel failure, if the run could not be simulated.
    pub error: Option<String>,
}

impl CellResult {
    pub fn ok(&self) -> bool {
        self.error.is_none() && self.violations.is_empty()
    }
}

fn run_cell(spec: RunSpec) -> CellResult {
    match run(&spec) {
        Ok(out) => CellResult {
            solved: out.verdict.solved,
            rounds: out.verdict.stats.rounds,
            moves: out.verdict.stats.total_moves,
            first_correct_termination: out.verdict.stats.first_correct_termination,
            violations: out
                .verdict
                .violations
                .iter()
                .map(|v| format!("{}@{}: {}", v.invariant, v.round, v.details))
                .collect(),
            error: None,
            spec,
        },
        Err(e) => CellResult {
            solved: false,
            rounds: 0,
            moves: 0,
            first_correct_termination: None,
            violations: Vec::new(),
            error: Some(e.to_string()),
            spec,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub runs: u64,
    pub solved: u64,
    pub failures: Vec<CellResult>,
    pub max_rounds: u64,
    pub max_moves: u64,
}

impl SweepSummary {
    pub fn clean(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Expands a sweep into run specs, refusing grids larger than the budget.
pub fn sweep_cells(cfg: &SweepConfig) -> Result<Vec<RunSpec>, HarnessError> {
    let ns = parse_range("ns", &cfg.ns)?;
    let seeds = parse_range("seeds", &cfg.seeds)?;
    let seeds = if seeds.is_empty() { vec![0] } else { seeds };
    let mut cells = Vec::new();
    for &n in &ns {
        let n = n as usize;
        let bhs: Vec<usize> = if cfg.bh.trim() == "all" {
            (0..n).collect()
        } else {
            parse_range("bh", &cfg.bh)?
                .into_iter()
                .map(|b| b as usize % n)
                .collect()
        };
        let advs = cfg.adversaries_for(n)?;
        for bh in bhs {
            let ring = RingConfig::new(n, bh).map_err(ConfigError::from)?;
            let placements = placements_for(&ring, cfg);
            for adv in &advs {
                let adv_seeds: &[u64] = if adv.is_seeded() { &seeds } else { &seeds[..1] };
                for &seed in adv_seeds {
                    for &starts in &placements {
                        let mut spec =
                            RunSpec::new(ring, starts, cfg.protocol, adv.with_seed(seed));
                        spec.reading = cfg.reference;
                        spec.bound_factor = cfg.bound_factor;
                        spec.horizon = cfg.bound_factor * (n as u64).pow(2);
                        cells.push(spec);
                    }
                }
            }
            let count = cells.len() as u64;
            if count > cfg.budget {
                return Err(HarnessError::Budget {
                    cells: count,
                    budget: cfg.budget,
                });
            }
        }
    }
    Ok(cells)
}

fn placements_for(ring: &RingConfig, cfg: &SweepConfig) -> Vec<[usize; 3]> {
    let nodes = (0..ring.n()).filter(|&v| v != ring.bh_index());
    if cfg.colocated || cfg.protocol == Protocol::CautiousPendulum {
        return nodes.map(|v| [v; 3]).collect();
    }
    let all = all_placements(ring);
    if all.len() <= cfg.placements {
        return all;
    }
    let seed = cfg.placement_seed ^ ((ring.n() as u64) << 32) ^ ring.bh_index() as u64;
    let mut out: Vec<[usize; 3]> = Vec::with_capacity(cfg.placements);
    let mut k = 0;
    while out.len() < cfg.placements {
        let s = random_starts(ring, seed.wrapping_add(k));
        k += 1;
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

pub fn run_cells(cells: Vec<RunSpec>) -> SweepSummary {
    let results: Vec<CellResult> = cells.into_par_iter().map(run_cell).collect();
    summarize(results)
}

fn summarize(results: Vec<CellResult>) -> SweepSummary {
    SweepSummary {
        runs: results.len() as u64,
        solved: results.iter().filter(|r| r.solved).count() as u64,
        max_rounds: results.iter().map(|r| r.rounds).max().unwrap_or(0),
        max_moves: results.iter().map(|r| r.moves).max().unwrap_or(0),
        failures: results.into_iter().filter(|r| !r.ok()).collect(),
    }
}

pub fn sweep(cfg: &SweepConfig) -> Result<SweepSummary, HarnessError> {
    Ok(run_cells(sweep_cells(cfg)?))
}

/// Random scattered instances against random and frontier adversaries.
pub fn fuzz_cells(seed: u64, count: u64, ns: (usize, usize), protocol: Protocol) -> Vec<RunSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(ns.0..=ns.1);
            let ring = RingConfig::new(n, rng.gen_range(0..n)).expect("n >= 4");
            let starts = match protocol {
                Protocol::CautiousPendulum => {
                    let v = random_starts(&ring, rng.gen())[0];
                    [v; 3]
                }
                Protocol::GatherAndLocate => random_starts(&ring, rng.gen()),
            };
            let adversary = match rng.gen_range(0..4) {
                0 => AdversarySpec::Random {
                    seed: rng.gen(),
                    p_block: rng.gen_range(0.0..1.0),
                    biased: false,
                },
                1 => AdversarySpec::Random {
                    seed: rng.gen(),
                    p_block: rng.gen_range(0.5..1.0),
                    biased: true,
                },
                2 => AdversarySpec::FrontierBlocker {
                    release: Some(rng.gen_range(2..=2 * n as u64)),
                },
                _ => AdversarySpec::Schedule {
                    missing: (0..rng.gen_range(1..=4 * n))
                        .map(|_| rng.gen_bool(0.7).then(|| rng.gen_range(0..n)))
                        .collect(),
                },
            };
            RunSpec::new(ring, starts, protocol, adversary)
        })
        .collect()
}

pub fn fuzz(seed: u64, count: u64, ns: (usize, usize), protocol: Protocol) -> SweepSummary {
    run_cells(fuzz_cells(seed, count, ns, protocol))
}
