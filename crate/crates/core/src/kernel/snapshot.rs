//! What an agent sees at the start of a round, and the meeting predicate.

use serde::{Deserialize, Serialize};

use super::agent::{AgentId, AgentState, Role};
use crate::protocols::ProtoState;

/// Another agent on the same node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeerView {
    pub id: AgentId,
    /// Live role: updated while colocated agents settle within the round.
    pub role: Role,
    /// State at the start of the round (`meeting[Back]` reads this).
    pub state: ProtoState,
    /// Live state, for handshakes between decision states.
    pub live_state: ProtoState,
    pub partner: Option<AgentId>,
    /// Arrived this round.
    pub arrived: bool,
    /// Able to communicate (not terminated, not retrieving its pebble).
    pub meetable: bool,
    pub terminated: bool,
    /// Standing on its own pebble, about to cross the edge it guards. Live:
    /// a prober that took a Phase-2 role this round no longer marks.
    pub probe_pending: bool,
}

/// Local view of one node at the start of a round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub round: u64,
    pub here: Vec<PeerView>,
    pub arrivals: Vec<AgentId>,
    pub pebbles_here: Vec<AgentId>,
    pub cw_edge_present: bool,
    pub ccw_edge_present: bool,
    pub self_arrived: bool,
}

/// Who a meeting predicate looks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Who {
    Id(AgentId),
    Role(Role),
    /// Matches on the state the other agent was in when the round began.
    State(ProtoState),
}

impl Who {
    fn matches(self, p: &PeerView) -> bool {
        match self {
            Who::Id(id) => p.id == id,
            Who::Role(r) => p.role == r,
            Who::State(s) => p.state == s,
        }
    }
}

impl Snapshot {
    pub fn peer(&self, id: AgentId) -> Option<&PeerView> {
        self.here.iter().find(|p| p.id == id)
    }

    /// `#A`: agents able to communicate here, the evaluator included.
    pub fn agents_here(&self) -> usize {
        1 + self.here.iter().filter(|p| p.meetable).count()
    }

    /// Foreign pebble on this node that currently marks it: the owner is not
    /// here, or is here but has not crossed the edge yet.
    pub fn marked_for(&self, me: AgentId) -> bool {
        self.pebbles_here
            .iter()
            .any(|&o| o != me && self.owner_marks(o))
    }

    /// Foreign mark whose owner is not on the node at all.
    pub fn abandoned_mark_for(&self, me: AgentId) -> bool {
        self.pebbles_here
            .iter()
            .any(|&o| o != me && self.peer(o).is_none_or(|p| p.terminated))
    }

    fn owner_marks(&self, owner: AgentId) -> bool {
        match self.peer(owner) {
            None => true,
            Some(p) => p.terminated || p.probe_pending,
        }
    }

    /// First meetable agent matching `who` such that one of the two arrived.
    pub fn first_meeting(&self, who: Who) -> Option<AgentId> {
        self.here
            .iter()
            .filter(|p| p.meetable && (p.arrived || self.self_arrived))
            .find(|p| who.matches(p))
            .map(|p| p.id)
    }

    /// Refreshes the live fields of `here` from the current agent states.
    pub fn refresh(&mut self, agents: &[AgentState]) {
        for p in &mut self.here {
            let a = &agents[p.id.index()];
            p.role = a.role;
            p.live_state = a.proto_state;
            p.partner = a.partner;
            p.terminated = a.terminated;
            p.meetable = a.is_active() && !a.cautious_phase.is_unmarking();
            p.probe_pending = super::probe_pending(a);
        }
    }
}

/// `meeting[who]` for the evaluating agent.
pub fn eval_meeting(agent: &AgentState, snap: &Snapshot, who: Who) -> bool {
    agent.is_active() && snap.first_meeting(who).is_some()
}
