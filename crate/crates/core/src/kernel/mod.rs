//! The synchronous round engine.
//!
//! A round runs in fixed sub-phases: the adversary picks the edge set, agents
//! standing on the black hole are destroyed, survivors take snapshots and
//! exchange messages, then settle their protocol states, then pebble
//! operations run in ascending id order, then moves, then counters.
//!
//! Settlement is a Jacobi iteration: in each pass every agent evaluates its
//! current state against the round's snapshots and the other agents' states
//! from the previous pass. Guards of a freshly entered call are evaluated in
//! the next pass, so colocated agents that react to one another (role
//! handshakes, gathering) agree within the same round. The loop stops at a
//! fixed point.

mod agent;
mod explore;
mod snapshot;
mod trace;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agent::{
    AgentId, AgentState, BhReport, CautiousPhase, Counters, Extents, PendingTransition,
    PendulumMemory, Role, AGENT_COUNT,
};
pub use explore::{
    advance_phase, cautious_explore_step, explore_step, CautiousStep, ExploreOutcome, PebbleOp,
};
pub use snapshot::{eval_meeting, PeerView, Snapshot, Who};
pub use trace::{
    EventKind, TerminationKind, Trace, TraceError, TraceEvent, TraceHeader, TRACE_FORMAT,
};

use crate::adversary::AdversaryStrategy;
use crate::protocols::{self, initial_state, Ctx, ProtoState, Protocol, Reading, StateKind};
use crate::ring::{Direction, EdgeSetError, RingConfig, RoundEdgeSet};

/// Settlement passes allowed per round before declaring a livelock.
const MAX_PASSES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("agent tried to place a pebble it does not hold")]
    PlaceWithoutPebble,
    #[error("agent left settlement in non-call state {0}")]
    Unsettled(ProtoState),
    #[error("state {0} is not a decision state")]
    NotADecision(ProtoState),
    #[error("CautiousPendulum needs at least two colocated agents")]
    PendulumNeedsCompany,
    #[error("settlement did not reach a fixed point in round {0}")]
    NoFixedPoint(u64),
    #[error("expected {expected} start nodes, got {got}")]
    AgentCount { expected: usize, got: usize },
    #[error("start node {0} is outside the ring or on the black hole")]
    BadStart(usize),
    #[error(transparent)]
    EdgeSet(#[from] EdgeSetError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorldState {
    pub round: u64,
    pub cfg: RingConfig,
    pub protocol: Protocol,
    pub reading: Reading,
    /// Edge set of the last executed round.
    pub edges: RoundEdgeSet,
    pub agents: Vec<AgentState>,
    /// Node → owners of the pebbles lying there.
    pub pebbles: BTreeMap<usize, Vec<AgentId>>,
    pub destroyed_pebbles: u8,
}

impl WorldState {
    pub fn new(
        cfg: RingConfig,
        starts: &[usize],
        protocol: Protocol,
        reading: Reading,
    ) -> Result<Self, KernelError> {
        if starts.len() != AGENT_COUNT {
            return Err(KernelError::AgentCount {
                expected: AGENT_COUNT,
                got: starts.len(),
            });
        }
        if let Some(&bad) = starts
            .iter()
            .find(|&&s| s >= cfg.n() || s == cfg.bh_index())
        {
            return Err(KernelError::BadStart(bad));
        }
        let (role, state) = initial_state(protocol);
        let agents = AgentId::all()
            .zip(starts)
            .map(|(id, &s)| AgentState::new(id, s, role, state))
            .collect();
        Ok(Self {
            round: 0,
            cfg,
            protocol,
            reading,
            edges: RoundEdgeSet::ALL_PRESENT,
            agents,
            pebbles: BTreeMap::new(),
            destroyed_pebbles: 0,
        })
    }

    pub fn agent(&self, id: AgentId) -> &AgentState {
        &self.agents[id.index()]
    }

    /// No agent can act any more.
    pub fn quiescent(&self) -> bool {
        self.agents.iter().all(|a| !a.is_active())
    }

    pub fn pebbles_on_nodes(&self) -> usize {
        self.pebbles.values().map(Vec::len).sum()
    }

    pub fn pebbles_held(&self) -> usize {
        self.agents
            .iter()
            .filter(|a| a.alive && a.holds_pebble)
            .count()
    }

    fn peer_view(&self, b: &AgentState) -> PeerView {
        PeerView {
            id: b.id,
            role: b.role,
            state: b.proto_state,
            live_state: b.proto_state,
            partner: b.partner,
            arrived: b.arrived,
            meetable: b.is_active() && !b.cautious_phase.is_unmarking(),
            terminated: b.terminated,
            probe_pending: probe_pending(b),
        }
    }

    /// Round-start view of agent `id`'s node.
    pub fn snapshot_for(&self, id: AgentId) -> Snapshot {
        let a = self.agent(id);
        let here: Vec<PeerView> = self
            .agents
            .iter()
            .filter(|b| b.id != id && b.alive && b.position == a.position)
            .map(|b| self.peer_view(b))
            .collect();
        let cw = self.cfg.incident_edge(a.position, Direction::Right);
        let ccw = self.cfg.incident_edge(a.position, Direction::Left);
        Snapshot {
            round: self.round,
            arrivals: here
                .iter()
                .filter(|p| p.arrived && p.meetable)
                .map(|p| p.id)
                .collect(),
            here,
            pebbles_here: self.pebbles.get(&a.position).cloned().unwrap_or_default(),
            cw_edge_present: self.edges.edge_present(cw),
            ccw_edge_present: self.edges.edge_present(ccw),
            self_arrived: a.arrived,
        }
    }

    /// Executes one round and returns its events.
    pub fn step(
        &mut self,
        adversary: &mut dyn AdversaryStrategy,
    ) -> Result<Vec<TraceEvent>, KernelError> {
        let r = self.round;
        let mut ev = Vec::new();
        let mut push = |agent: Option<AgentId>, kind: EventKind| {
            ev.push(TraceEvent {
                round: r,
                agent,
                kind,
            })
        };

        let edges = adversary.choose(self);
        edges.validate(&self.cfg)?;
        self.edges = edges;
        push(
            None,
            EventKind::Round {
                missing: edges.missing.map(|e| e.0),
            },
        );

        let bh = self.cfg.bh_index();
        for a in &mut self.agents {
            if a.alive && a.position == bh {
                a.alive = false;
                if a.holds_pebble {
                    self.destroyed_pebbles += 1;
                }
                push(
                    Some(a.id),
                    EventKind::EnterBh {
                        at: bh,
                        with_pebble: a.holds_pebble,
                    },
                );
            }
        }

        let snaps: Vec<Snapshot> = AgentId::all().map(|id| self.snapshot_for(id)).collect();

        // Communication.
        for i in 0..AGENT_COUNT {
            for j in i + 1..AGENT_COUNT {
                let (a, b) = (&self.agents[i], &self.agents[j]);
                let at = a.position;
                let meetable = |x: &AgentState| x.is_active() && !x.cautious_phase.is_unmarking();
                if a.position == b.position
                    && meetable(a)
                    && meetable(b)
                    && (a.arrived || b.arrived)
                {
                    let (pa, pb) = (self.peer_view(a), self.peer_view(b));
                    for (x, other) in [(i, &pb), (j, &pa)] {
                        let x = &mut self.agents[x];
                        x.counters.meets[other.id.index()] += 1;
                        x.counters.rlast_met[other.id.index()] = 0;
                        protocols::on_meeting(x, other);
                    }
                    push(
                        Some(AgentId(i as u8)),
                        EventKind::Meet {
                            other: AgentId(j as u8),
                            at,
                        },
                    );
                }
            }
        }

        // Settlement.
        let before = self.agents.clone();
        let mut cur = self.agents.clone();
        let mut force = false;
        let mut settled = false;
        for _ in 0..MAX_PASSES {
            let mut next = cur.clone();
            let mut changed = false;
            for i in 0..AGENT_COUNT {
                let mut snap = snaps[i].clone();
                snap.refresh(&cur);
                let ctx = Ctx {
                    n: self.cfg.n(),
                    snap: &snap,
                    reading: self.reading,
                };
                if let Some(s) = protocols::settle_step(&cur[i], &ctx, force)? {
                    for kind in s.events {
                        push(Some(AgentId(i as u8)), kind);
                    }
                    next[i] = s.agent;
                    changed = true;
                }
            }
            cur = next;
            if changed {
                force = false;
                continue;
            }
            let waiting = cur
                .iter()
                .any(|a| a.is_active() && a.proto_state.kind() == StateKind::Decision);
            if waiting && !force {
                force = true;
                continue;
            }
            settled = !waiting;
            break;
        }
        if !settled {
            return Err(KernelError::NoFixedPoint(r));
        }
        for a in &cur {
            if a.terminated && !before[a.id.index()].terminated {
                let report = a.bh_report.expect("terminal states set a report");
                push(
                    Some(a.id),
                    EventKind::Terminate {
                        at: a.position,
                        report: report.resolve(&self.cfg, a.start),
                        via: match a.proto_state {
                            ProtoState::TerminateR => TerminationKind::FailedReport,
                            _ => TerminationKind::NextClockwise,
                        },
                    },
                );
            }
        }

        // Pebble operations, ascending id.
        let mut moves = [None; AGENT_COUNT];
        for a in cur.iter_mut() {
            let (op, mv) = protocols::action(a)?;
            match op {
                Some(PebbleOp::Place) if a.holds_pebble => {
                    a.holds_pebble = false;
                    a.pebble_node = Some(a.position);
                }
                Some(PebbleOp::Place) => return Err(KernelError::PlaceWithoutPebble),
                Some(PebbleOp::Take) if a.own_pebble_here() => {
                    a.holds_pebble = true;
                    a.pebble_node = None;
                }
                _ => {}
            }
            moves[a.id.index()] = mv;
        }
        for (old, new) in before.iter().zip(&cur) {
            if old.pebble_node == new.pebble_node {
                continue;
            }
            if let Some(at) = old.pebble_node {
                push(Some(new.id), EventKind::TakePebble { at });
            }
            if let Some(at) = new.pebble_node {
                push(Some(new.id), EventKind::PlacePebble { at });
            }
        }

        // Moves.
        let n = self.cfg.n();
        let mut cw_missing = [false; AGENT_COUNT];
        let mut ccw_missing = [false; AGENT_COUNT];
        for (i, a) in cur.iter_mut().enumerate() {
            a.arrived = false;
            if !a.is_active() {
                continue;
            }
            let from = a.position;
            cw_missing[i] = !self
                .edges
                .edge_present(self.cfg.incident_edge(from, Direction::Right));
            ccw_missing[i] = !self
                .edges
                .edge_present(self.cfg.incident_edge(from, Direction::Left));
            let cautious = matches!(a.proto_state.kind(), StateKind::Call { cautious: true, .. });
            let moved = match moves[i] {
                None => {
                    push(Some(a.id), EventKind::Wait { at: from });
                    false
                }
                Some(dir) if self.edges.edge_present(self.cfg.incident_edge(from, dir)) => {
                    let to = self.cfg.neighbor(from, dir);
                    a.position = to;
                    a.record_step(dir, n);
                    a.arrived = true;
                    push(Some(a.id), EventKind::Move { from, to, dir });
                    true
                }
                Some(dir) => {
                    push(Some(a.id), EventKind::Blocked { at: from, dir });
                    false
                }
            };
            if cautious && moves[i].is_some() {
                a.cautious_phase = advance_phase(a.cautious_phase, moved);
            }
        }

        // Counters.
        for (i, a) in cur.iter_mut().enumerate() {
            if !a.is_active() {
                continue;
            }
            let c = &mut a.counters;
            c.ttime += 1;
            if a.hold_window {
                c.etime = 0;
                c.emtime_c = 0;
                c.emtime_cc = 0;
                a.hold_window = false;
            } else {
                c.etime += 1;
                c.emtime_c += cw_missing[i] as u64;
                c.emtime_cc += ccw_missing[i] as u64;
            }
            for t in &mut c.rlast_met {
                *t += 1;
            }
            if matches!(a.role, Role::Leader | Role::MLeader) && cw_missing[i] {
                a.pendulum.report_window += 1;
            }
        }

        self.agents = cur;
        self.pebbles.clear();
        for a in &self.agents {
            if let Some(v) = a.pebble_node {
                self.pebbles.entry(v).or_default().push(a.id);
            }
        }
        self.round += 1;
        Ok(ev)
    }
}

/// Standing on its own pebble with the guarded edge not yet crossed.
fn probe_pending(b: &AgentState) -> bool {
    if !b.own_pebble_here() {
        return false;
    }
    match b.proto_state {
        ProtoState::Init => b.cautious_phase == CautiousPhase::MarkedAndAdvancing,
        ProtoState::ExplorerProbe => b.counters.enodes == 0,
        _ => false,
    }
}

/// Functional form of [`WorldState::step`].
pub fn advance_round(
    world: &WorldState,
    adversary: &mut dyn AdversaryStrategy,
) -> Result<(WorldState, Vec<TraceEvent>), KernelError> {
    let mut next = world.clone();
    let events = next.step(adversary)?;
    Ok((next, events))
}
