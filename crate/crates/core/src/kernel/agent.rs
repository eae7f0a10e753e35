//! Agent identity, roles, counters and the agent-local view of position.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::protocols::ProtoState;
use crate::ring::{Direction, RingConfig};

/// Number of agents in every run. The protocols are written for exactly three.
pub const AGENT_COUNT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u8);

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = AgentId> {
        (0..AGENT_COUNT as u8).map(AgentId)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Start,
    Explorer,
    Follower,
    MLeader,
    Retroguard,
    Leader,
    Avanguard,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Stage of an in-flight pebble cautious walk.
///
/// One new node costs three rounds when nothing is blocked: place and
/// advance, step back, take and advance again.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum CautiousPhase {
    /// Pebble in hand on an explored node.
    #[default]
    Idle,
    /// Pebble placed on the current node; crossing forward not yet done.
    MarkedAndAdvancing,
    /// On the probed node, walking back to the marked one.
    ReturningForPebble,
    /// Back on the marked node: take the pebble and advance again.
    Reclaiming,
    /// Pebble recovered, forward edge was missing; still heading forward.
    ResumingForward,
}

impl CautiousPhase {
    /// While the pebble must still be recovered the agent cannot meet
    /// others; only the phase-ending timeout may interrupt it.
    pub fn is_unmarking(self) -> bool {
        matches!(
            self,
            CautiousPhase::ReturningForPebble | CautiousPhase::Reclaiming
        )
    }
}

/// The variables every procedure call maintains.
///
/// `tnodes`/`enodes` are derived from walked extents (see [`Extents`]):
/// an agent recognises a node as new by counting steps in one direction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Counters {
    pub ttime: u64,
    pub tnodes: u64,
    pub etime: u64,
    pub enodes: u64,
    pub emtime_c: u64,
    pub emtime_cc: u64,
    pub meets: [u32; AGENT_COUNT],
    pub rlast_met: [u64; AGENT_COUNT],
}

impl Counters {
    /// Start of a fresh Explore/CautiousExplore call.
    pub fn reset_call(&mut self) {
        self.etime = 0;
        self.enodes = 0;
        self.emtime_c = 0;
        self.emtime_cc = 0;
    }

    pub fn invariants_hold(&self) -> bool {
        self.etime <= self.ttime
            && self.emtime_c <= self.etime
            && self.emtime_cc <= self.etime
            && self.enodes <= self.tnodes.max(1)
    }
}

/// Signed interval of displacements an agent has covered, relative to some
/// origin it remembers. The width of the interval is the number of distinct
/// nodes it knows it visited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Extents {
    pub min: i64,
    pub max: i64,
}

impl Extents {
    pub fn at(disp: i64) -> Self {
        Self {
            min: disp,
            max: disp,
        }
    }

    pub fn extend(&mut self, disp: i64) {
        self.min = self.min.min(disp);
        self.max = self.max.max(disp);
    }

    pub fn width(&self) -> u64 {
        (self.max - self.min) as u64
    }
}

/// Where the black hole is, in the reporting agent's own frame: `offset`
/// clockwise hops from the node at displacement `reference` from its start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BhReport {
    pub reference: i64,
    pub offset: i64,
}

impl BhReport {
    pub fn resolve(&self, cfg: &RingConfig, start: usize) -> usize {
        cfg.offset(start, self.reference + self.offset)
    }
}

/// Per-role memory for the pendulum roles.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PendulumMemory {
    /// Displacement of the node where the roles were assigned.
    pub home: i64,
    /// Displacement where the leader last met the retroguard.
    pub last_report_at: i64,
    /// Completed retroguard swings (`#Meets[Retroguard]` since assignment).
    pub reports: u32,
    pub retroguard: Option<AgentId>,
    pub avanguard: Option<AgentId>,
    pub leader: Option<AgentId>,
    /// Rounds with the leader's clockwise edge missing since the last report.
    pub report_window: u64,
    /// Retroguard: steps of the current outward swing.
    pub swing_target: u64,
}

/// A transition observed while the pebble was out; applied once the cycle
/// completes if the agent it concerns is still there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PendingTransition {
    pub target: ProtoState,
    pub partner: Option<AgentId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub role: Role,
    pub proto_state: ProtoState,
    /// Absolute node index. Simulator-only; protocol code reads `disp`.
    pub position: usize,
    pub start: usize,
    /// Signed clockwise displacement from `start`.
    pub disp: i64,
    pub alive: bool,
    pub terminated: bool,
    pub bh_report: Option<BhReport>,
    pub holds_pebble: bool,
    /// Absolute node of the pebble when it is not held.
    pub pebble_node: Option<usize>,
    pub cautious_phase: CautiousPhase,
    pub pending_transition: Option<PendingTransition>,
    pub counters: Counters,
    pub total_extent: Extents,
    pub call_extent: Extents,
    /// Moved successfully in the previous round.
    pub arrived: bool,
    /// Round at which Phase 2 began for this agent.
    pub phase2_start: Option<u64>,
    /// Partner remembered by role-assignment states.
    pub partner: Option<AgentId>,
    pub pendulum: PendulumMemory,
    /// Restart the wait window at the end of this round.
    pub hold_window: bool,
    pub moves: u64,
}

impl AgentState {
    pub fn new(id: AgentId, start: usize, role: Role, proto_state: ProtoState) -> Self {
        Self {
            id,
            role,
            proto_state,
            position: start,
            start,
            disp: 0,
            alive: true,
            terminated: false,
            bh_report: None,
            holds_pebble: true,
            pebble_node: None,
            cautious_phase: CautiousPhase::Idle,
            pending_transition: None,
            counters: Counters {
                tnodes: 1,
                ..Counters::default()
            },
            total_extent: Extents::at(0),
            call_extent: Extents::at(0),
            arrived: false,
            phase2_start: None,
            partner: None,
            pendulum: PendulumMemory::default(),
            hold_window: false,
            moves: 0,
        }
    }

    /// Alive and not yet terminated.
    pub fn is_active(&self) -> bool {
        self.alive && !self.terminated
    }

    pub fn own_pebble_here(&self) -> bool {
        !self.holds_pebble && self.pebble_node == Some(self.position)
    }

    /// Pebble neither carried nor on the current node.
    pub fn pebble_missing(&self) -> bool {
        !self.holds_pebble && self.pebble_node != Some(self.position)
    }

    pub fn begin_call(&mut self) {
        self.counters.reset_call();
        self.call_extent = Extents::at(self.disp);
        self.hold_window = false;
    }

    pub(crate) fn record_step(&mut self, dir: Direction, n: usize) {
        self.disp += dir.delta();
        self.total_extent.extend(self.disp);
        self.call_extent.extend(self.disp);
        self.counters.tnodes = (self.total_extent.width() + 1).min(n as u64);
        self.counters.enodes = self.call_extent.width().min(n as u64 - 1);
        self.moves += 1;
    }

    pub fn phase2_time(&self) -> Option<u64> {
        self.phase2_start.map(|s| self.counters.ttime - s)
    }

    pub fn resolved_report(&self, cfg: &RingConfig) -> Option<usize> {
        self.bh_report.map(|r| r.resolve(cfg, self.start))
    }
}
