//! Guard evaluation, decision states and per-round settlement steps.

use super::predicates::{failed_report, predicate_next_unsafe};
use super::{Family, Guard, ProtoState, Reading, StateKind};
use crate::kernel::{
    cautious_explore_step, explore_step, AgentId, AgentState, BhReport, CautiousPhase, EventKind,
    ExploreOutcome, KernelError, PebbleOp, PeerView, PendingTransition, Role, Snapshot, Who,
};
use crate::ring::Direction;

use ProtoState as S;

/// Everything a protocol step may look at besides the agent itself.
#[derive(Debug, Clone, Copy)]
pub struct Ctx<'a> {
    pub n: usize,
    pub snap: &'a Snapshot,
    pub reading: Reading,
}

impl Ctx<'_> {
    pub fn phase1_budget(&self) -> u64 {
        9 * self.n as u64
    }

    pub fn phase2_budget(&self) -> u64 {
        4 * (self.n as u64).pow(2)
    }
}

type Firing = (ProtoState, Option<AgentId>);

/// Agent state after one settlement pass, with the events it produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settled {
    pub agent: AgentState,
    pub events: Vec<EventKind>,
}

fn eval_guard(a: &AgentState, ctx: &Ctx, g: Guard) -> Option<Option<AgentId>> {
    let snap = ctx.snap;
    let c = &a.counters;
    let yes = |b: bool| if b { Some(None) } else { None };
    match g {
        Guard::PhaseOneOver => yes(c.ttime == ctx.phase1_budget() || snap.agents_here() == 3),
        Guard::Marked => yes(snap.marked_for(a.id)),
        Guard::Meeting(who) => snap.first_meeting(who).map(Some),
        Guard::MeetingAvanguard => a
            .pendulum
            .avanguard
            .and_then(|id| snap.first_meeting(Who::Id(id)))
            .map(Some),
        Guard::NextUnsafe => yes(snap.abandoned_mark_for(a.id) && predicate_next_unsafe(c)),
        Guard::NextSafe => yes(!snap.marked_for(a.id)),
        Guard::NewNode => yes(c.enodes > 0),
        Guard::MarkedNewNode => yes(c.enodes > 0 && snap.marked_for(a.id)),
        Guard::PhaseTwoTimeout => yes(a.phase2_time().is_some_and(|t| t > ctx.phase2_budget())),
        Guard::FailedReport => yes(failed_report(
            a.pendulum.report_window,
            a.pendulum.reports,
            c.tnodes,
        )),
        Guard::AvanguardAway => yes(a
            .pendulum
            .avanguard
            .is_none_or(|id| snap.peer(id).is_none())),
        Guard::WitnessLost => yes(predicate_next_unsafe(c)),
        Guard::SwingDone => yes(c.enodes >= a.pendulum.swing_target),
    }
}

fn first_firing(a: &AgentState, ctx: &Ctx) -> Option<Firing> {
    a.proto_state
        .guards()
        .iter()
        .find_map(|&(g, t)| eval_guard(a, ctx, g).map(|p| (t, p)))
}

/// One round of the agent's current call, ignoring pebble-cycle details.
pub fn call_step(a: &AgentState, ctx: &Ctx) -> ExploreOutcome<ProtoState> {
    let dir = match a.proto_state.kind() {
        StateKind::Call { dir, .. } => dir,
        _ => None,
    };
    explore_step(dir, a.proto_state.guards(), |g| {
        eval_guard(a, ctx, *g).is_some()
    })
}

pub fn phase1_step(a: &AgentState, ctx: &Ctx) -> ExploreOutcome<ProtoState> {
    debug_assert_eq!(a.proto_state.family(), Family::Phase1);
    call_step(a, ctx)
}

pub fn phase2_step(a: &AgentState, ctx: &Ctx) -> ExploreOutcome<ProtoState> {
    debug_assert_eq!(a.proto_state.family(), Family::Phase2);
    call_step(a, ctx)
}

pub fn cautious_pendulum_step(a: &AgentState, ctx: &Ctx) -> ExploreOutcome<ProtoState> {
    debug_assert!(matches!(
        a.proto_state.family(),
        Family::Pendulum | Family::Phase2
    ));
    call_step(a, ctx)
}

fn set_role(a: &mut AgentState, role: Role, events: &mut Vec<EventKind>) {
    if a.role != role {
        events.push(EventKind::RoleChange {
            from: a.role,
            to: role,
        });
        a.role = role;
    }
}

fn take_own_if_here(a: &mut AgentState) {
    if a.own_pebble_here() {
        a.holds_pebble = true;
        a.pebble_node = None;
    }
}

fn place(a: &mut AgentState) -> Result<(), KernelError> {
    if a.holds_pebble {
        a.holds_pebble = false;
        a.pebble_node = Some(a.position);
        Ok(())
    } else if a.own_pebble_here() {
        Ok(())
    } else {
        Err(KernelError::PlaceWithoutPebble)
    }
}

fn enter(
    a: &mut AgentState,
    target: ProtoState,
    partner: Option<AgentId>,
    ctx: &Ctx,
    events: &mut Vec<EventKind>,
) {
    let from = a.proto_state;
    events.push(EventKind::StateChange { from, to: target });
    a.proto_state = target;
    if partner.is_some() {
        a.partner = partner;
    }
    match target.kind() {
        StateKind::Call { .. } => {
            a.begin_call();
            a.cautious_phase = CautiousPhase::Idle;
            a.pending_transition = None;
            if target == S::RetroOut {
                if from == S::RetroBack {
                    a.pendulum.reports += 1;
                }
                let out = (a.disp - a.pendulum.home) + a.pendulum.reports as i64 + 1;
                a.pendulum.swing_target = out.max(1) as u64;
            }
        }
        StateKind::Terminal => {
            a.terminated = true;
            a.bh_report = Some(match target {
                S::TerminateR => BhReport {
                    reference: match ctx.reading {
                        Reading::LastMeeting => a.pendulum.last_report_at,
                        Reading::RoleAssignment => a.pendulum.home,
                    },
                    offset: -(a.pendulum.reports as i64 + 1),
                },
                _ => BhReport {
                    reference: a.disp,
                    offset: 1,
                },
            });
        }
        StateKind::Decision => {}
    }
}

/// Roles of an assignment group in ascending id order.
fn assign_roles(
    a: &mut AgentState,
    group: &[AgentId],
    events: &mut Vec<EventKind>,
) -> Option<Firing> {
    let (roles, targets): (&[Role], &[ProtoState]) = match group.len() {
        0 | 1 => return None,
        2 => (&[Role::Retroguard, Role::MLeader], &[S::RetroOut, S::Go]),
        _ => (
            &[Role::Retroguard, Role::Leader, Role::Avanguard],
            &[S::RetroOut, S::LeadProbe, S::AvProbe],
        ),
    };
    let idx = group.iter().position(|&g| g == a.id)?;
    if idx >= roles.len() {
        return None;
    }
    let mem = &mut a.pendulum;
    mem.home = a.disp;
    mem.last_report_at = a.disp;
    mem.reports = 0;
    mem.report_window = 0;
    mem.retroguard = Some(group[0]);
    mem.leader = Some(group[1]);
    mem.avanguard = group.get(2).copied().filter(|_| roles.len() == 3);
    set_role(a, roles[idx], events);
    Some((targets[idx], None))
}

fn group_of(a: &AgentState, snap: &Snapshot, member: impl Fn(&PeerView) -> bool) -> Vec<AgentId> {
    let mut g: Vec<AgentId> = snap
        .here
        .iter()
        .filter(|p| p.meetable && member(p))
        .map(|p| p.id)
        .collect();
    g.push(a.id);
    g.sort();
    g
}

/// Entry actions and successor of a decision state. `None` means the state
/// waits for a colocated partner to catch up within this round.
fn resolve(
    a: &mut AgentState,
    ctx: &Ctx,
    force: bool,
    events: &mut Vec<EventKind>,
) -> Result<Option<Firing>, KernelError> {
    let snap = ctx.snap;
    Ok(match a.proto_state {
        S::Two => {
            let partner = a
                .partner
                .and_then(|id| snap.peer(id))
                .filter(|p| p.meetable);
            let explorer = match partner {
                None => Some(true),
                Some(p) if p.live_state == S::Two && p.partner == Some(a.id) => Some(a.id < p.id),
                Some(p) if p.role == Role::Explorer => Some(false),
                Some(p) if p.role == Role::Follower => Some(true),
                Some(_) if force => Some(true),
                Some(_) => None,
            };
            match explorer {
                Some(true) => {
                    set_role(a, Role::Explorer, events);
                    Some((S::Explorer, None))
                }
                Some(false) => {
                    set_role(a, Role::Follower, events);
                    Some((S::WaitFollower, None))
                }
                None => None,
            }
        }
        S::Copy => {
            set_role(a, Role::Follower, events);
            Some((S::WaitFollower, None))
        }
        S::EndPhase1 => {
            set_role(a, Role::Start, events);
            a.phase2_start = Some(a.counters.ttime);
            Some((S::InitP2, None))
        }
        S::Explorer => {
            if snap.marked_for(a.id) {
                Some((S::ExplorerHold, None))
            } else {
                place(a)?;
                Some((S::ExplorerProbe, None))
            }
        }
        S::MoveForward => {
            take_own_if_here(a);
            Some((S::MoveForwardWalk, None))
        }
        S::InitP2 => Some(if snap.agents_here() > 1 {
            (S::AssignRoles, None)
        } else if a.pebble_missing() {
            (S::Recover, None)
        } else if a.own_pebble_here() || snap.marked_for(a.id) {
            take_own_if_here(a);
            (S::Hold, None)
        } else {
            (S::Forward, None)
        }),
        S::AssignRoles => {
            take_own_if_here(a);
            let group = group_of(a, snap, |p| p.live_state == S::AssignRoles);
            Some(assign_roles(a, &group, events).unwrap_or((S::Forward, None)))
        }
        S::PendulumStart => {
            let group = group_of(a, snap, |p| p.live_state == S::PendulumStart);
            match assign_roles(a, &group, events) {
                Some(f) => Some(f),
                None => return Err(KernelError::PendulumNeedsCompany),
            }
        }
        S::BeAvanguard => {
            take_own_if_here(a);
            set_role(a, Role::Avanguard, events);
            a.pendulum.leader = a.partner;
            a.pendulum.avanguard = None;
            Some((S::AvProbe, None))
        }
        S::StartCP => {
            set_role(a, Role::Leader, events);
            a.pendulum.avanguard = a.partner;
            Some((S::LeadProbe, None))
        }
        other => return Err(KernelError::NotADecision(other)),
    })
}

/// Guards of a pebble walk: only the phase timeout may interrupt the
/// retrieval of the pebble; anything else is remembered for later.
fn cautious_firing(
    a: &mut AgentState,
    ctx: &Ctx,
    dir: Direction,
) -> Result<Option<Firing>, KernelError> {
    let phase = a.cautious_phase;
    let fired = first_firing(a, ctx);
    if phase.is_unmarking() {
        let urgent = (a.counters.ttime == ctx.phase1_budget()).then_some((S::EndPhase1, None));
        let step = cautious_explore_step(phase, a.holds_pebble, dir, fired, urgent)?;
        return Ok(match step.outcome {
            ExploreOutcome::Transition(f) => {
                if step.pebble == Some(PebbleOp::Take) {
                    take_own_if_here(a);
                }
                Some(f)
            }
            _ => {
                a.pending_transition = step
                    .deferred
                    .map(|(target, partner)| PendingTransition { target, partner });
                None
            }
        });
    }
    let pending = a.pending_transition.take();
    let fired = fired.or_else(|| {
        let p = pending.filter(|_| phase == CautiousPhase::Idle)?;
        let partner = p.partner.and_then(|id| ctx.snap.peer(id))?;
        partner.meetable.then_some((p.target, p.partner))
    });
    let step = cautious_explore_step(phase, a.holds_pebble, dir, fired, None)?;
    Ok(match step.outcome {
        ExploreOutcome::Transition(f) => {
            if step.pebble == Some(PebbleOp::Take) {
                take_own_if_here(a);
            }
            Some(f)
        }
        _ => None,
    })
}

/// One Jacobi pass for one agent: evaluate the current call's guards or
/// resolve the current decision state. Returns `None` when nothing changed.
pub fn settle_step(a: &AgentState, ctx: &Ctx, force: bool) -> Result<Option<Settled>, KernelError> {
    if !a.is_active() {
        return Ok(None);
    }
    let mut next = a.clone();
    let mut events = Vec::new();
    match a.proto_state.kind() {
        StateKind::Terminal => return Ok(None),
        StateKind::Decision => {
            if let Some((t, p)) = resolve(&mut next, ctx, force, &mut events)? {
                enter(&mut next, t, p, ctx, &mut events);
            }
        }
        StateKind::Call { dir, cautious } => {
            if matches!(a.proto_state.family(), Family::Phase2 | Family::Pendulum) {
                take_own_if_here(&mut next);
            }
            if a.proto_state.watches_mark() {
                next.hold_window = !ctx.snap.abandoned_mark_for(a.id);
            }
            let firing = match (cautious, dir) {
                (true, Some(d)) => cautious_firing(&mut next, ctx, d)?,
                _ => first_firing(&next, ctx),
            };
            if let Some((t, p)) = firing {
                enter(&mut next, t, p, ctx, &mut events);
            }
        }
    }
    Ok((next != *a).then_some(Settled {
        agent: next,
        events,
    }))
}

/// Pebble operation and move attempt of a settled agent.
pub fn action(a: &AgentState) -> Result<(Option<PebbleOp>, Option<Direction>), KernelError> {
    if !a.is_active() {
        return Ok((None, None));
    }
    match a.proto_state.kind() {
        StateKind::Call {
            dir: Some(d),
            cautious: true,
        } => {
            let s = cautious_explore_step::<()>(a.cautious_phase, a.holds_pebble, d, None, None)?;
            let mv = match s.outcome {
                ExploreOutcome::MoveAttempt(d) => Some(d),
                _ => None,
            };
            Ok((s.pebble, mv))
        }
        StateKind::Call { dir, .. } => Ok((None, dir)),
        _ => Err(KernelError::Unsettled(a.proto_state)),
    }
}

/// Bookkeeping when two agents meet: a leader hears the retroguard's report.
pub fn on_meeting(a: &mut AgentState, other: &PeerView) {
    let leads = matches!(a.role, Role::Leader | Role::MLeader);
    if leads && a.pendulum.retroguard == Some(other.id) && other.state == S::RetroBack {
        a.pendulum.reports += 1;
        a.pendulum.last_report_at = a.disp;
        a.pendulum.report_window = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::WorldState;
    use crate::protocols::Protocol;
    use crate::ring::RingConfig;

    /// Agent 1 waits on node 7 (the black hole's ccw neighbour) next to
    /// agent 0's pebble.
    fn waiting_next_to_pebble(owner_alive: bool) -> WorldState {
        let cfg = RingConfig::new(8, 0).unwrap();
        let mut w = WorldState::new(
            cfg,
            &[7, 7, 3],
            Protocol::GatherAndLocate,
            Reading::default(),
        )
        .unwrap();
        w.agents[0].holds_pebble = false;
        w.agents[0].pebble_node = Some(7);
        w.pebbles.insert(7, vec![AgentId(0)]);
        if !owner_alive {
            w.agents[0].alive = false;
            w.agents[0].position = 0;
        }
        let b = &mut w.agents[1];
        b.proto_state = S::Wait;
        b.counters.etime = 4;
        b.counters.emtime_c = 1;
        w
    }

    fn settle(w: &WorldState, i: usize) -> Option<Settled> {
        let snap = w.snapshot_for(AgentId(i as u8));
        let ctx = Ctx {
            n: w.cfg.n(),
            snap: &snap,
            reading: w.reading,
        };
        settle_step(&w.agents[i], &ctx, false).unwrap()
    }

    #[test]
    fn abandoned_mark_after_the_wait_window_terminates() {
        let w = waiting_next_to_pebble(false);
        let s = settle(&w, 1).expect("state changes");
        assert_eq!(s.agent.proto_state, S::Terminate);
        assert!(s.agent.terminated);
        assert_eq!(s.agent.resolved_report(&w.cfg), Some(0));
    }

    #[test]
    fn a_present_owner_makes_the_node_safe() {
        let w = waiting_next_to_pebble(true);
        let s = settle(&w, 1).expect("state changes");
        assert_eq!(s.agent.proto_state, S::Init);
        assert!(!s.agent.terminated);
    }

    #[test]
    fn the_wait_window_must_elapse() {
        let mut w = waiting_next_to_pebble(false);
        w.agents[1].counters.etime = 1;
        assert!(settle(&w, 1).is_none_or(|s| s.agent.proto_state == S::Wait));
    }

    #[test]
    fn phase1_timeout_wins() {
        let cfg = RingConfig::new(5, 0).unwrap();
        let mut w = WorldState::new(
            cfg,
            &[1, 2, 3],
            Protocol::GatherAndLocate,
            Reading::default(),
        )
        .unwrap();
        w.agents[2].counters.ttime = 45;
        let s = settle(&w, 2).expect("state changes");
        assert_eq!(s.agent.proto_state, S::EndPhase1);
        assert_eq!(s.agent.role, Role::Start);
    }

    #[test]
    fn actions_by_state_kind() {
        let mut a = AgentState::new(AgentId(0), 1, Role::Explorer, S::ExplorerProbe);
        assert_eq!(action(&a).unwrap(), (None, Some(Direction::Right)));
        a.proto_state = S::Wait;
        assert_eq!(action(&a).unwrap(), (None, None));
        a.proto_state = S::Two;
        assert_eq!(action(&a), Err(KernelError::Unsettled(S::Two)));
        a.terminated = true;
        assert_eq!(action(&a).unwrap(), (None, None));
        let init = AgentState::new(AgentId(1), 1, Role::Start, S::Init);
        assert_eq!(
            action(&init).unwrap(),
            (Some(PebbleOp::Place), Some(Direction::Right))
        );
    }

    #[test]
    fn only_a_returning_retroguard_reports() {
        let mut leader = AgentState::new(AgentId(1), 2, Role::Leader, S::LeadWaitAv);
        leader.pendulum.retroguard = Some(AgentId(0));
        leader.disp = 3;
        leader.pendulum.report_window = 5;
        let mut retro = PeerView {
            id: AgentId(0),
            role: Role::Retroguard,
            state: S::RetroOut,
            live_state: S::RetroOut,
            partner: None,
            arrived: true,
            meetable: true,
            terminated: false,
            probe_pending: false,
        };
        on_meeting(&mut leader, &retro);
        assert_eq!(leader.pendulum.reports, 0);
        retro.state = S::RetroBack;
        on_meeting(&mut leader, &retro);
        assert_eq!(leader.pendulum.reports, 1);
        assert_eq!(leader.pendulum.last_report_at, 3);
        assert_eq!(leader.pendulum.report_window, 0);
        let mut av = AgentState::new(AgentId(2), 2, Role::Avanguard, S::AvProbe);
        av.pendulum.retroguard = Some(AgentId(0));
        on_meeting(&mut av, &retro);
        assert_eq!(av.pendulum.reports, 0);
    }
}
