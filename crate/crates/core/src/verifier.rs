//! Trace checkers: the solved condition, safety invariants, the Phase-1
//! properties and the complexity bounds.
//!
//! Everything here reads only the trace. The header gives the ring and the
//! start nodes; the events are replayed to recover positions, pebbles,
//! states and deaths round by round.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kernel::{AgentId, EventKind, Role, Trace, TraceEvent, AGENT_COUNT};
use crate::protocols::{Family, ProtoState, Protocol};
use crate::ring::{Direction, RingConfig};

/// Default multiplier of `n²` for the round horizon and the move bound.
pub const DEFAULT_BOUND_FACTOR: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    Soundness,
    Liveness,
    OneMissingEdge,
    PebbleConservation,
    AliveOnBlackHole,
    Phase1Deaths,
    Phase1Marker,
    Phase1Deadline,
    Phase1Trichotomy,
    MoveBound,
    TraceShape,
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub invariant: Invariant,
    pub round: u64,
    pub details: String,
}

/// What became of an agent that never terminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fate {
    Terminated,
    Dead,
    BlockedForever,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Stats {
    pub rounds: u64,
    pub total_moves: u64,
    pub moves_per_agent: Vec<u64>,
    pub first_correct_termination: Option<u64>,
    pub deaths: u32,
    pub phase1_deaths: u32,
    pub terminations: u32,
    pub fates: Vec<Option<Fate>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub solved: bool,
    pub violations: Vec<Violation>,
    pub stats: Stats,
}

impl Verdict {
    pub fn has(&self, inv: Invariant) -> bool {
        self.violations.iter().any(|v| v.invariant == inv)
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Per-round reconstruction of a run.
#[derive(Debug, Clone)]
pub struct Replay {
    pub cfg: RingConfig,
    pub position: Vec<usize>,
    pub alive: Vec<bool>,
    pub terminated: Vec<bool>,
    pub holds: Vec<bool>,
    pub pebble_at: Vec<Option<usize>>,
    pub state: Vec<ProtoState>,
    pub role: Vec<Role>,
    pub moves: Vec<u64>,
}

impl Replay {
    pub fn start(trace: &Trace) -> Option<Self> {
        let h = &trace.header;
        let cfg = RingConfig::new(h.n, h.bh_index).ok()?;
        if h.starts.len() != AGENT_COUNT {
            return None;
        }
        let (role, state) = crate::protocols::initial_state(h.protocol);
        Some(Self {
            cfg,
            position: h.starts.clone(),
            alive: vec![true; AGENT_COUNT],
            terminated: vec![false; AGENT_COUNT],
            holds: vec![true; AGENT_COUNT],
            pebble_at: vec![None; AGENT_COUNT],
            state: vec![state; AGENT_COUNT],
            role: vec![role; AGENT_COUNT],
            moves: vec![0; AGENT_COUNT],
        })
    }

    pub fn active(&self, i: usize) -> bool {
        self.alive[i] && !self.terminated[i]
    }

    pub fn marked(&self, v: usize) -> bool {
        self.pebble_at.contains(&Some(v))
    }
}

/// Events grouped by round, in trace order.
pub fn rounds(trace: &Trace) -> Vec<&[TraceEvent]> {
    let ev = &trace.events;
    let mut out = Vec::new();
    let mut s = 0;
    for i in 1..=ev.len() {
        if i == ev.len() || ev[i].round != ev[s].round {
            out.push(&ev[s..i]);
            s = i;
        }
    }
    out
}

fn agent_of(e: &TraceEvent) -> Option<usize> {
    e.agent.map(AgentId::index).filter(|&i| i < AGENT_COUNT)
}

/// A round-by-round walk over the trace with a callback after the deaths of
/// each round (the snapshot instant) and after the whole round.
pub(crate) fn walk(
    trace: &Trace,
    out: &mut Vec<Violation>,
    mut at_snapshot: impl FnMut(u64, &Replay, &mut Vec<Violation>),
    mut after_round: impl FnMut(u64, &[TraceEvent], &Replay, &Replay, &mut Vec<Violation>),
) -> Option<Replay> {
    let Some(mut rp) = Replay::start(trace) else {
        out.push(Violation {
            invariant: Invariant::TraceShape,
            round: 0,
            details: "header does not describe a valid ring and three agents".into(),
        });
        return None;
    };
    let bh = rp.cfg.bh_index();
    for (k, evs) in rounds(trace).into_iter().enumerate() {
        let r = evs[0].round;
        if r != k as u64 || !matches!(evs[0].kind, EventKind::Round { .. }) {
            out.push(Violation {
                invariant: Invariant::TraceShape,
                round: r,
                details: format!("round {k} does not start with its edge record"),
            });
            return Some(rp);
        }
        let edge_records = evs
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Round { .. }))
            .count();
        if let EventKind::Round { missing: Some(e) } = evs[0].kind {
            if e >= rp.cfg.n() {
                out.push(Violation {
                    invariant: Invariant::OneMissingEdge,
                    round: r,
                    details: format!("missing edge {e} is not a ring edge"),
                });
            }
        }
        if edge_records != 1 {
            out.push(Violation {
                invariant: Invariant::OneMissingEdge,
                round: r,
                details: format!("{edge_records} edge records in one round"),
            });
        }
        let before = rp.clone();
        let mut snapped = false;
        for e in evs {
            let Some(i) = agent_of(e) else { continue };
            if !snapped && !matches!(e.kind, EventKind::EnterBh { .. }) {
                snapped = true;
                at_snapshot(r, &rp, out);
            }
            match &e.kind {
                EventKind::EnterBh { at, .. } => {
                    if *at != bh || rp.position[i] != bh || !rp.alive[i] {
                        out.push(Violation {
                            invariant: Invariant::TraceShape,
                            round: r,
                            details: format!("agent {i} dies away from the black hole"),
                        });
                    }
                    rp.alive[i] = false;
                }
                EventKind::Move { from, to, dir } => {
                    let expected = rp.cfg.neighbor(*from, *dir);
                    if rp.position[i] != *from || *to != expected || !rp.active(i) {
                        out.push(Violation {
                            invariant: Invariant::TraceShape,
                            round: r,
                            details: format!("agent {i} teleports"),
                        });
                    }
                    rp.position[i] = *to;
                    rp.moves[i] += 1;
                }
                EventKind::PlacePebble { at } => {
                    if !rp.holds[i] || !rp.alive[i] || rp.position[i] != *at {
                        out.push(Violation {
                            invariant: Invariant::PebbleConservation,
                            round: r,
                            details: format!("agent {i} places a pebble it does not hold"),
                        });
                    }
                    rp.holds[i] = false;
                    rp.pebble_at[i] = Some(*at);
                }
                EventKind::TakePebble { at } => {
                    if rp.pebble_at[i] != Some(*at) || !rp.alive[i] || rp.position[i] != *at {
                        out.push(Violation {
                            invariant: Invariant::PebbleConservation,
                            round: r,
                            details: format!("agent {i} takes a pebble that is not there"),
                        });
                    }
                    rp.holds[i] = true;
                    rp.pebble_at[i] = None;
                }
                EventKind::StateChange { to, .. } => rp.state[i] = *to,
                EventKind::RoleChange { to, .. } => rp.role[i] = *to,
                EventKind::Terminate { .. } => rp.terminated[i] = true,
                _ => {}
            }
        }
        if !snapped {
            at_snapshot(r, &rp, out);
        }
        for i in 0..AGENT_COUNT {
            let pebbles = rp.holds[i] as u8 + rp.pebble_at[i].is_some() as u8;
            if pebbles != 1 {
                out.push(Violation {
                    invariant: Invariant::PebbleConservation,
                    round: r,
                    details: format!("agent {i}'s pebble is counted {pebbles} times"),
                });
            }
        }
        after_round(r, evs, &before, &rp, out);
    }
    Some(rp)
}

/// Safety properties that hold at every round: no false reports, one missing
/// edge at most, pebble conservation, nobody alive on the black hole.
pub fn check_safety(trace: &Trace) -> Vec<Violation> {
    let mut out = Vec::new();
    let bh = trace.header.bh_index;
    walk(
        trace,
        &mut out,
        |r, rp, out| {
            for i in 0..AGENT_COUNT {
                if rp.alive[i] && rp.position[i] == bh {
                    out.push(Violation {
                        invariant: Invariant::AliveOnBlackHole,
                        round: r,
                        details: format!("agent {i} is alive on the black hole"),
                    });
                }
            }
        },
        |r, evs, _, _, out| {
            for e in evs {
                if let EventKind::Terminate { report, .. } = e.kind {
                    if report != bh {
                        out.push(Violation {
                            invariant: Invariant::Soundness,
                            round: r,
                            details: format!(
                                "agent {} reports node {report}, black hole is {bh}",
                                agent_of(e).unwrap_or(9)
                            ),
                        });
                    }
                }
            }
        },
    );
    out
}

/// The BHS solved condition, agent fates and run statistics.
pub fn check_solved(trace: &Trace, horizon: u64) -> Verdict {
    let mut violations = Vec::new();
    let bh = trace.header.bh_index;
    let mut first_correct = None;
    let mut terminations = 0;
    let mut deaths = 0;
    let mut blocked_on: Vec<Option<(usize, u64)>> = vec![None; AGENT_COUNT];
    let mut last_missing: Option<(usize, u64)> = None;
    let rp = walk(
        trace,
        &mut violations,
        |_, _, _| {},
        |r, evs, _, _, out| {
            if let EventKind::Round { missing } = evs[0].kind {
                last_missing = match (missing, last_missing) {
                    (Some(e), Some((p, since))) if p == e => Some((e, since)),
                    (Some(e), _) => Some((e, r)),
                    (None, _) => None,
                };
            }
            for e in evs {
                let Some(i) = agent_of(e) else { continue };
                match e.kind {
                    EventKind::Terminate { report, .. } => {
                        terminations += 1;
                        if report == bh {
                            first_correct.get_or_insert(r);
                        } else {
                            out.push(Violation {
                                invariant: Invariant::Soundness,
                                round: r,
                                details: format!("agent {i} reports {report}, black hole is {bh}"),
                            });
                        }
                    }
                    EventKind::EnterBh { .. } => deaths += 1,
                    EventKind::Blocked { at, dir } => {
                        blocked_on[i] = Some((Replay::edge(trace, at, dir), r));
                    }
                    EventKind::Move { .. } | EventKind::Wait { .. } => blocked_on[i] = None,
                    _ => {}
                }
            }
        },
    );
    let rounds = trace.rounds();
    let mut stats = Stats {
        rounds,
        deaths,
        terminations,
        first_correct_termination: first_correct,
        ..Stats::default()
    };
    let Some(rp) = rp else {
        return Verdict {
            solved: false,
            violations,
            stats,
        };
    };
    stats.moves_per_agent = rp.moves.clone();
    stats.total_moves = rp.moves.iter().sum();
    // Structural "blocked forever": the agent's last act was a blocked move
    // across the edge the adversary has kept missing ever since, for at least
    // 4n rounds before the end of the trace.
    let stable = 4 * trace.header.n as u64;
    stats.fates = (0..AGENT_COUNT)
        .map(|i| {
            Some(if rp.terminated[i] {
                Fate::Terminated
            } else if !rp.alive[i] {
                Fate::Dead
            } else {
                let stuck = match (blocked_on[i], last_missing) {
                    (Some((e, _)), Some((m, since))) => {
                        e == m && rounds.saturating_sub(since) >= stable
                    }
                    _ => false,
                };
                if trace.header.permanent_removal && stuck {
                    Fate::BlockedForever
                } else {
                    Fate::TimedOut
                }
            })
        })
        .collect();
    let survivor_correct =
        first_correct.is_some() && (0..AGENT_COUNT).any(|i| rp.terminated[i] && rp.alive[i]);
    let sound = !violations
        .iter()
        .any(|v| v.invariant == Invariant::Soundness);
    let solved = survivor_correct && sound;
    if !solved && sound {
        violations.push(Violation {
            invariant: Invariant::Liveness,
            round: rounds.min(horizon),
            details: if rounds < horizon {
                "every agent stopped without a correct termination".into()
            } else {
                format!("no correct termination within {horizon} rounds")
            },
        });
    }
    Verdict {
        solved,
        violations,
        stats,
    }
}

impl Replay {
    fn edge(trace: &Trace, at: usize, dir: Direction) -> usize {
        match dir {
            Direction::Right => at,
            Direction::Left => (at + trace.header.n - 1) % trace.header.n,
        }
    }
}

/// Both agents sets gathered: one node, or all but one on `v` and the last on
/// `v+1` with its pebble on `v`.
fn gathered(rp: &Replay, group: &[usize]) -> bool {
    let Some(&first) = group.first() else {
        return true;
    };
    if group.iter().all(|&i| rp.position[i] == rp.position[first]) {
        return true;
    }
    group.iter().any(|&s| {
        let v = rp.cfg.neighbor(rp.position[s], Direction::Left);
        rp.pebble_at[s] == Some(v)
            && group
                .iter()
                .filter(|&&o| o != s)
                .all(|&o| rp.position[o] == v)
    })
}

/// Checks on the first phase of Gather&Locate: deaths, marker, deadline, outcome.
pub fn check_phase1_invariants(trace: &Trace) -> Vec<Violation> {
    let mut out = Vec::new();
    if trace.header.protocol != Protocol::GatherAndLocate {
        return out;
    }
    let n = trace.header.n as u64;
    let budget = 9 * n;
    let bh = trace.header.bh_index;
    let marker = (bh + trace.header.n - 1) % trace.header.n;
    let mut phase1_deaths: Vec<u64> = Vec::new();
    let mut ended: Vec<Option<u64>> = vec![None; AGENT_COUNT];
    let mut checked_outcome = false;
    walk(
        trace,
        &mut out,
        |_, _, _| {},
        |r, evs, before, after, out| {
            for e in evs {
                let Some(i) = agent_of(e) else { continue };
                match e.kind {
                    EventKind::EnterBh { .. } if before.state[i].family() == Family::Phase1 => {
                        phase1_deaths.push(r);
                        if phase1_deaths.len() == 2 {
                            out.push(Violation {
                                invariant: Invariant::Phase1Deaths,
                                round: r,
                                details: format!("second Phase-1 death (agent {i})"),
                            });
                        }
                    }
                    EventKind::StateChange {
                        to: ProtoState::EndPhase1,
                        ..
                    } => {
                        ended[i] = Some(r);
                        if r > budget {
                            out.push(Violation {
                                invariant: Invariant::Phase1Deadline,
                                round: r,
                                details: format!("agent {i} ends Phase 1 after round {budget}"),
                            });
                        }
                    }
                    _ => {}
                }
            }
            let in_phase1 = |i: usize| after.active(i) && after.state[i].family() == Family::Phase1;
            if r == budget + 1 {
                for i in (0..AGENT_COUNT).filter(|&i| in_phase1(i)) {
                    out.push(Violation {
                        invariant: Invariant::Phase1Deadline,
                        round: r,
                        details: format!("agent {i} still in Phase 1"),
                    });
                }
            }
            // The marker must be in place from the death until Phase 1 ends.
            if let Some(&d) = phase1_deaths.first() {
                let someone_in_phase1 = (0..AGENT_COUNT)
                    .any(|i| before.active(i) && before.state[i].family() == Family::Phase1);
                if r >= d && someone_in_phase1 && !after.marked(marker) {
                    out.push(Violation {
                        invariant: Invariant::Phase1Marker,
                        round: r,
                        details: format!("node {marker} unmarked after a Phase-1 death"),
                    });
                }
            }
            let any_ended_now = evs.iter().any(|e| {
                matches!(
                    e.kind,
                    EventKind::StateChange {
                        to: ProtoState::EndPhase1,
                        ..
                    }
                )
            });
            if !checked_outcome && any_ended_now && !(0..AGENT_COUNT).any(in_phase1) {
                checked_outcome = true;
                if let Some(why) = trichotomy(before, after, marker) {
                    out.push(Violation {
                        invariant: Invariant::Phase1Trichotomy,
                        round: r,
                        details: why,
                    });
                }
            }
        },
    );
    out
}

/// `None` when the Phase-1 outcome is one of the three admissible ones.
/// `before` is the state at the start of the ending round (positions,
/// pebbles), `after` holds the terminations decided in it.
fn trichotomy(before: &Replay, after: &Replay, marker: usize) -> Option<String> {
    let dead: Vec<usize> = (0..AGENT_COUNT).filter(|&i| !after.alive[i]).collect();
    let term: Vec<usize> = (0..AGENT_COUNT)
        .filter(|&i| after.alive[i] && after.terminated[i])
        .collect();
    let active: Vec<usize> = (0..AGENT_COUNT).filter(|&i| after.active(i)).collect();
    let gathered_now = gathered(before, &active);
    match (dead.len(), term.len()) {
        (0, 0) if gathered_now => None,
        (1, 0) if before.marked(marker) && gathered_now => None,
        (1, t) if t >= 1 && before.marked(marker) && active.len() <= 1 => None,
        (d, t) => Some(format!(
            "{d} dead, {t} terminated, active agents at {:?} not gathered{}",
            active
                .iter()
                .map(|&i| before.position[i])
                .collect::<Vec<_>>(),
            if d > 0 && !before.marked(marker) {
                ", black hole neighbour unmarked"
            } else {
                ""
            }
        )),
    }
}

/// Every check that applies to a single run.
pub fn verify(trace: &Trace, horizon: u64, bound_factor: u64) -> Verdict {
    let mut v = check_solved(trace, horizon);
    let mut extra = check_safety(trace);
    extra.retain(|x| x.invariant != Invariant::Soundness && x.invariant != Invariant::TraceShape);
    extra.retain(|x| !v.violations.contains(x));
    v.violations.extend(extra);
    v.violations
        .extend(check_phase1_invariants(trace).into_iter().filter(|x| {
            x.invariant != Invariant::TraceShape && x.invariant != Invariant::PebbleConservation
        }));
    let n2 = (trace.header.n as u64).pow(2);
    if v.stats.total_moves > bound_factor * n2 {
        v.violations.push(Violation {
            invariant: Invariant::MoveBound,
            round: v.stats.rounds,
            details: format!(
                "{} moves exceed {bound_factor}·n² = {}",
                v.stats.total_moves,
                bound_factor * n2
            ),
        });
    }
    v.violations.sort_by_key(|x| (x.round, x.invariant));
    v.violations.dedup();
    v.stats.phase1_deaths = phase1_death_count(trace);
    v
}

fn phase1_death_count(trace: &Trace) -> u32 {
    let mut state = [crate::protocols::initial_state(trace.header.protocol).1; AGENT_COUNT];
    let mut count = 0;
    for e in &trace.events {
        let Some(i) = agent_of(e) else { continue };
        match e.kind {
            EventKind::StateChange { to, .. } => state[i] = to,
            EventKind::EnterBh { .. } if state[i].family() == Family::Phase1 => count += 1,
            _ => {}
        }
    }
    count
}

/// Least-squares fit of `log y = slope · log n + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub points: Vec<(u64, u64)>,
    pub slope: f64,
    pub intercept: f64,
}

pub fn log_log_fit(points: &[(u64, u64)]) -> Option<Fit> {
    if points.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| (p.1.max(1) as f64).ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some(Fit {
        points: points.to_vec(),
        slope,
        intercept: my - slope * mx,
    })
}

/// Report over an n-sweep: worst moves and rounds per `n`, the bound check
/// and the log-log slope of the worst rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub max_moves: Vec<(u64, u64)>,
    pub max_rounds: Vec<(u64, u64)>,
    pub within_bound: bool,
    pub rounds_fit: Option<Fit>,
    pub moves_fit: Option<Fit>,
}

/// `runs` holds `(n, total moves, rounds to first correct termination)`.
pub fn check_bounds(runs: &[(u64, u64, u64)], factor: u64) -> BoundsReport {
    let mut ns: Vec<u64> = runs.iter().map(|r| r.0).collect();
    ns.sort();
    ns.dedup();
    let worst = |f: fn(&(u64, u64, u64)) -> u64| -> Vec<(u64, u64)> {
        ns.iter()
            .map(|&n| {
                (
                    n,
                    runs.iter().filter(|r| r.0 == n).map(f).max().unwrap_or(0),
                )
            })
            .collect()
    };
    let max_moves = worst(|r| r.1);
    let max_rounds = worst(|r| r.2);
    let within_bound = max_moves
        .iter()
        .chain(&max_rounds)
        .all(|&(n, v)| v <= factor * n * n);
    BoundsReport {
        rounds_fit: log_log_fit(&max_rounds),
        moves_fit: log_log_fit(&max_moves),
        max_moves,
        max_rounds,
        within_bound,
    }
}
