//! Gather&Locate and CautiousPendulum as guarded state machines.
//!
//! Every state is one of three kinds. A *call* state runs one
//! `Explore`/`CautiousExplore` procedure with an ordered guard list. A
//! *decision* state performs its entry actions and picks the next state
//! without consuming a round. A *terminal* state ends the agent.

mod machine;
mod predicates;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::kernel::{Role, Who};
use crate::ring::Direction;

pub use machine::{
    action, call_step, cautious_pendulum_step, on_meeting, phase1_step, phase2_step, settle_step,
    Ctx, Settled,
};
pub use predicates::{failed_report, predicate_failed_report, predicate_next_unsafe};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    #[default]
    GatherAndLocate,
    CautiousPendulum,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::GatherAndLocate => "gather_and_locate",
            Protocol::CautiousPendulum => "cautious_pendulum",
        })
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gather_and_locate" => Ok(Protocol::GatherAndLocate),
            "cautious_pendulum" => Ok(Protocol::CautiousPendulum),
            other => Err(format!("unknown protocol `{other}`")),
        }
    }
}

/// Which node a failed-report termination counts back from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reading {
    /// Where the leader last met the retroguard.
    LastMeeting,
    /// Where the pendulum roles were assigned.
    #[default]
    RoleAssignment,
}

impl fmt::Display for Reading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reading::LastMeeting => "last_meeting",
            Reading::RoleAssignment => "role_assignment",
        })
    }
}

impl FromStr for Reading {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last_meeting" => Ok(Reading::LastMeeting),
            "role_assignment" => Ok(Reading::RoleAssignment),
            other => Err(format!("unknown reference reading `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProtoState {
    // Phase 1, Start.
    Init,
    Wait,
    Two,
    Copy,
    EndPhase1,
    // Phase 1, Explorer.
    Explorer,
    ExplorerProbe,
    ExplorerHold,
    Back,
    MoveForward,
    MoveForwardWalk,
    // Phase 1, Follower.
    WaitFollower,
    Follow,
    // Phase 2.
    InitP2,
    Recover,
    Hold,
    Forward,
    AssignRoles,
    BeAvanguard,
    Go,
    Cautious,
    StartCP,
    // CautiousPendulum.
    PendulumStart,
    LeadProbe,
    LeadWaitAv,
    LeadAdvance,
    AvProbe,
    AvReturn,
    AvAdvance,
    RetroOut,
    RetroBack,
    // Terminal.
    Terminate,
    TerminateR,
}

impl fmt::Display for ProtoState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Phase1,
    Phase2,
    Pendulum,
    Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Call {
        dir: Option<Direction>,
        cautious: bool,
    },
    Decision,
    Terminal,
}

/// Predicates a guard can test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Guard {
    /// `Ttime = 9n ∨ #A = 3`.
    PhaseOneOver,
    /// Current node carries a foreign mark.
    Marked,
    Meeting(Who),
    /// Met the avanguard this leader remembers.
    MeetingAvanguard,
    /// Marked by an absent agent and the clockwise edge was present during
    /// the wait.
    NextUnsafe,
    /// The marker came back (or there is no mark).
    NextSafe,
    /// `Enodes > 0`.
    NewNode,
    /// `marked ∧ Enodes > 0`.
    MarkedNewNode,
    /// Phase-2-local `Ttime > 4n²`.
    PhaseTwoTimeout,
    FailedReport,
    /// The avanguard is no longer on the leader's node.
    AvanguardAway,
    /// The avanguard did not come back although the edge was there.
    WitnessLost,
    /// The retroguard covered its current swing.
    SwingDone,
}

use Guard as G;
use ProtoState as S;

const START: Who = Who::Role(Role::Start);

impl ProtoState {
    pub fn family(self) -> Family {
        match self {
            S::Init
            | S::Wait
            | S::Two
            | S::Copy
            | S::EndPhase1
            | S::Explorer
            | S::ExplorerProbe
            | S::ExplorerHold
            | S::Back
            | S::MoveForward
            | S::MoveForwardWalk
            | S::WaitFollower
            | S::Follow => Family::Phase1,
            S::InitP2
            | S::Recover
            | S::Hold
            | S::Forward
            | S::AssignRoles
            | S::BeAvanguard
            | S::Go
            | S::Cautious
            | S::StartCP => Family::Phase2,
            S::PendulumStart
            | S::LeadProbe
            | S::LeadWaitAv
            | S::LeadAdvance
            | S::AvProbe
            | S::AvReturn
            | S::AvAdvance
            | S::RetroOut
            | S::RetroBack => Family::Pendulum,
            S::Terminate | S::TerminateR => Family::Terminal,
        }
    }

    pub fn kind(self) -> StateKind {
        let call = |dir, cautious| StateKind::Call { dir, cautious };
        let right = Some(Direction::Right);
        let left = Some(Direction::Left);
        match self {
            S::Init => call(right, true),
            S::Wait
            | S::ExplorerHold
            | S::WaitFollower
            | S::Hold
            | S::Cautious
            | S::LeadProbe
            | S::LeadWaitAv => call(None, false),
            S::ExplorerProbe
            | S::MoveForwardWalk
            | S::Follow
            | S::Forward
            | S::Go
            | S::LeadAdvance
            | S::AvProbe
            | S::AvAdvance
            | S::RetroBack => call(right, false),
            S::Back | S::Recover | S::AvReturn | S::RetroOut => call(left, false),
            S::Two
            | S::Copy
            | S::EndPhase1
            | S::Explorer
            | S::MoveForward
            | S::InitP2
            | S::AssignRoles
            | S::BeAvanguard
            | S::StartCP
            | S::PendulumStart => StateKind::Decision,
            S::Terminate | S::TerminateR => StateKind::Terminal,
        }
    }

    pub fn is_call(self) -> bool {
        matches!(self.kind(), StateKind::Call { .. })
    }

    /// States that watch a mark and restart their wait window while its
    /// owner is still standing on it.
    pub fn watches_mark(self) -> bool {
        matches!(self, S::Wait | S::ExplorerHold | S::Cautious)
    }

    /// The ordered guard list of a call state.
    pub fn guards(self) -> &'static [(Guard, ProtoState)] {
        match self {
            S::Init => &[
                (G::PhaseOneOver, S::EndPhase1),
                (G::Marked, S::Wait),
                (G::Meeting(START), S::Two),
                (G::Meeting(Who::Role(Role::Follower)), S::Copy),
                (G::Meeting(Who::Role(Role::Explorer)), S::Copy),
            ],
            S::Wait => &[
                (G::PhaseOneOver, S::EndPhase1),
                (G::NextUnsafe, S::Terminate),
                (G::NextSafe, S::Init),
            ],
            S::ExplorerProbe => &[(G::PhaseOneOver, S::EndPhase1), (G::NewNode, S::Back)],
            S::ExplorerHold => &[
                (G::PhaseOneOver, S::EndPhase1),
                (G::NextUnsafe, S::Terminate),
                (G::NextSafe, S::Explorer),
            ],
            S::Back => &[
                (G::PhaseOneOver, S::EndPhase1),
                (G::NewNode, S::MoveForward),
            ],
            S::MoveForwardWalk => &[(G::PhaseOneOver, S::EndPhase1), (G::NewNode, S::Explorer)],
            S::WaitFollower => &[
                (G::PhaseOneOver, S::EndPhase1),
                (G::Meeting(Who::State(S::Back)), S::Follow),
            ],
            S::Follow => &[
                (G::PhaseOneOver, S::EndPhase1),
                (G::NewNode, S::WaitFollower),
            ],
            S::Recover => &[
                (G::Meeting(START), S::AssignRoles),
                (G::Meeting(Who::Role(Role::MLeader)), S::BeAvanguard),
                (G::NewNode, S::Forward),
                (G::PhaseTwoTimeout, S::Forward),
            ],
            S::Hold => &[
                (G::Meeting(START), S::AssignRoles),
                (G::Meeting(Who::Role(Role::MLeader)), S::BeAvanguard),
                (G::PhaseTwoTimeout, S::Forward),
            ],
            S::Forward => &[
                (G::MarkedNewNode, S::Terminate),
                (G::Meeting(START), S::AssignRoles),
                (G::Meeting(Who::Role(Role::MLeader)), S::BeAvanguard),
            ],
            S::Go => &[
                (G::Marked, S::Cautious),
                (G::Meeting(START), S::StartCP),
                (G::FailedReport, S::TerminateR),
            ],
            S::Cautious => &[
                (G::Meeting(START), S::StartCP),
                (G::NextUnsafe, S::Terminate),
                (G::FailedReport, S::TerminateR),
            ],
            S::LeadProbe => &[
                (G::FailedReport, S::TerminateR),
                (G::AvanguardAway, S::LeadWaitAv),
            ],
            S::LeadWaitAv => &[
                (G::MeetingAvanguard, S::LeadAdvance),
                (G::WitnessLost, S::Terminate),
                (G::FailedReport, S::TerminateR),
            ],
            S::LeadAdvance => &[(G::FailedReport, S::TerminateR), (G::NewNode, S::LeadProbe)],
            S::AvProbe => &[(G::NewNode, S::AvReturn)],
            S::AvReturn => &[(G::NewNode, S::AvAdvance)],
            S::AvAdvance => &[(G::NewNode, S::AvProbe)],
            S::RetroOut => &[(G::SwingDone, S::RetroBack)],
            S::RetroBack => &[
                (G::Meeting(Who::Role(Role::Leader)), S::RetroOut),
                (G::Meeting(Who::Role(Role::MLeader)), S::RetroOut),
            ],
            _ => &[],
        }
    }
}

/// Initial role and state of every agent under a protocol.
pub fn initial_state(protocol: Protocol) -> (Role, ProtoState) {
    match protocol {
        Protocol::GatherAndLocate => (Role::Start, ProtoState::Init),
        Protocol::CautiousPendulum => (Role::Start, ProtoState::PendulumStart),
    }
}
