//! The two movement procedures every protocol state is written in.

use serde::{Deserialize, Serialize};

use super::agent::CautiousPhase;
use super::KernelError;
use crate::ring::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExploreOutcome<T> {
    Transition(T),
    MoveAttempt(Direction),
    Stay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PebbleOp {
    Place,
    Take,
}

/// One round of `Explore(dir | p1: s1; p2: s2; ...)`.
pub fn explore_step<G, T: Copy>(
    dir: Option<Direction>,
    guards: &[(G, T)],
    mut holds: impl FnMut(&G) -> bool,
) -> ExploreOutcome<T> {
    for (g, target) in guards {
        if holds(g) {
            return ExploreOutcome::Transition(*target);
        }
    }
    match dir {
        Some(d) => ExploreOutcome::MoveAttempt(d),
        None => ExploreOutcome::Stay,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CautiousStep<T> {
    pub outcome: ExploreOutcome<T>,
    pub pebble: Option<PebbleOp>,
    /// Guard that fired while the pebble was out; to be reconsidered once
    /// the cycle completes.
    pub deferred: Option<T>,
}

/// One round of `CautiousExplore(dir | ...)`.
///
/// `fired` is the first satisfied guard of the call, `urgent` the first
/// satisfied guard that may interrupt pebble retrieval (the phase timeout).
pub fn cautious_explore_step<T: Copy>(
    phase: CautiousPhase,
    holds_pebble: bool,
    dir: Direction,
    fired: Option<T>,
    urgent: Option<T>,
) -> Result<CautiousStep<T>, KernelError> {
    use CautiousPhase::*;
    let step = |outcome, pebble, deferred| CautiousStep {
        outcome,
        pebble,
        deferred,
    };
    Ok(match phase {
        ReturningForPebble => match urgent {
            Some(t) => step(ExploreOutcome::Transition(t), None, None),
            None => step(ExploreOutcome::MoveAttempt(dir.opposite()), None, fired),
        },
        Reclaiming => match urgent {
            Some(t) => step(ExploreOutcome::Transition(t), Some(PebbleOp::Take), None),
            None => step(
                ExploreOutcome::MoveAttempt(dir),
                Some(PebbleOp::Take),
                fired,
            ),
        },
        MarkedAndAdvancing => match fired {
            Some(t) => step(ExploreOutcome::Transition(t), Some(PebbleOp::Take), None),
            None => step(ExploreOutcome::MoveAttempt(dir), None, None),
        },
        ResumingForward => match fired {
            Some(t) => step(ExploreOutcome::Transition(t), None, None),
            None => step(ExploreOutcome::MoveAttempt(dir), None, None),
        },
        Idle => match fired {
            Some(t) => step(ExploreOutcome::Transition(t), None, None),
            None if !holds_pebble => return Err(KernelError::PlaceWithoutPebble),
            None => step(
                ExploreOutcome::MoveAttempt(dir),
                Some(PebbleOp::Place),
                None,
            ),
        },
    })
}

/// Substate after the round's move attempt.
pub fn advance_phase(phase: CautiousPhase, moved: bool) -> CautiousPhase {
    use CautiousPhase::*;
    match (phase, moved) {
        (Idle | MarkedAndAdvancing, true) => ReturningForPebble,
        (Idle | MarkedAndAdvancing, false) => MarkedAndAdvancing,
        (ReturningForPebble, true) => Reclaiming,
        (ReturningForPebble, false) => ReturningForPebble,
        (Reclaiming | ResumingForward, true) => Idle,
        (Reclaiming | ResumingForward, false) => ResumingForward,
    }
}
