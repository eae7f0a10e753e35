//! Edge-removal policies.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{Role, WorldState};
use crate::ring::{Direction, EdgeId, RingConfig, RoundEdgeSet};

/// A policy choosing at most one missing edge per round from the full state.
pub trait AdversaryStrategy: Send {
    fn name(&self) -> String;

    fn choose(&mut self, world: &WorldState) -> RoundEdgeSet;

    /// Whether this policy may keep an edge missing forever.
    fn permanent_removal(&self) -> bool {
        false
    }
}

/// Serializable description of a strategy, used by run configs and sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum AdversarySpec {
    Static,
    FrontierBlocker {
        /// Release every `period` rounds; `None` blocks permanently.
        release: Option<u64>,
    },
    PendulumStaller,
    Random {
        seed: u64,
        p_block: f64,
        #[serde(default)]
        biased: bool,
    },
    Schedule {
        missing: Vec<Option<usize>>,
    },
}

impl fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversarySpec::Static => f.write_str("static"),
            AdversarySpec::FrontierBlocker { release: None } => {
                f.write_str("frontier_blocker(permanent)")
            }
            AdversarySpec::FrontierBlocker { release: Some(t) } => {
                write!(f, "frontier_blocker(release={t})")
            }
            AdversarySpec::PendulumStaller => f.write_str("pendulum_staller"),
            AdversarySpec::Random {
                seed,
                p_block,
                biased,
            } => write!(
                f,
                "random(seed={seed},p={p_block}{})",
                if *biased { ",biased" } else { "" }
            ),
            AdversarySpec::Schedule { missing } => write!(f, "schedule({} rounds)", missing.len()),
        }
    }
}

impl AdversarySpec {
    pub fn build(&self) -> Box<dyn AdversaryStrategy> {
        match self {
            AdversarySpec::Static => Box::new(static_adversary()),
            AdversarySpec::FrontierBlocker { release } => Box::new(frontier_blocker(*release)),
            AdversarySpec::PendulumStaller => Box::new(pendulum_staller()),
            AdversarySpec::Random {
                seed,
                p_block,
                biased,
            } => {
                let mut r = random_adversary(*seed, *p_block);
                r.biased = *biased;
                Box::new(r)
            }
            AdversarySpec::Schedule { missing } => Box::new(Schedule::new(missing.clone())),
        }
    }

    pub fn permanent_removal(&self) -> bool {
        matches!(self, AdversarySpec::FrontierBlocker { release: None })
    }

    /// Same strategy with a different seed, where that means anything.
    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            AdversarySpec::Random {
                p_block, biased, ..
            } => AdversarySpec::Random {
                seed,
                p_block: *p_block,
                biased: *biased,
            },
            other => other.clone(),
        }
    }

    pub fn is_seeded(&self) -> bool {
        matches!(self, AdversarySpec::Random { .. })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Static;

pub fn static_adversary() -> Static {
    Static
}

impl AdversaryStrategy for Static {
    fn name(&self) -> String {
        "static".into()
    }

    fn choose(&mut self, _: &WorldState) -> RoundEdgeSet {
        RoundEdgeSet::ALL_PRESENT
    }
}

/// Blocks the clockwise boundary of the explored region holding the most
/// agents, so the frontier can only grow from the other side.
#[derive(Debug, Clone, Default)]
pub struct FrontierBlocker {
    pub release: Option<u64>,
    explored: Vec<bool>,
}

pub fn frontier_blocker(release: Option<u64>) -> FrontierBlocker {
    FrontierBlocker {
        release: release.filter(|&t| t > 0),
        explored: Vec::new(),
    }
}

/// Maximal runs of explored nodes as `(first, last)` in clockwise order.
fn explored_arcs(explored: &[bool]) -> Vec<(usize, usize)> {
    let n = explored.len();
    if explored.iter().all(|&e| e) {
        return Vec::new();
    }
    let gap = explored.iter().position(|&e| !e).unwrap_or(0);
    let mut arcs = Vec::new();
    let mut run: Option<usize> = None;
    for k in 1..=n {
        let v = (gap + k) % n;
        match (explored[v], run) {
            (true, None) => run = Some(v),
            (false, Some(s)) => {
                arcs.push((s, (v + n - 1) % n));
                run = None;
            }
            _ => {}
        }
    }
    arcs
}

fn on_arc(v: usize, (s, e): (usize, usize), n: usize) -> bool {
    (v + n - s) % n <= (e + n - s) % n
}

impl FrontierBlocker {
    /// Edge the blocker removes in `world`, ignoring the release schedule.
    pub fn frontier_edge(&mut self, world: &WorldState) -> Option<EdgeId> {
        let n = world.cfg.n();
        if self.explored.len() != n {
            self.explored = vec![false; n];
        }
        for a in world.agents.iter().filter(|a| a.alive) {
            self.explored[a.position] = true;
        }
        let arcs = explored_arcs(&self.explored);
        let best = arcs.iter().max_by_key(|&&arc| {
            let mut ids = world
                .agents
                .iter()
                .filter(|a| a.is_active() && on_arc(a.position, arc, n))
                .map(|a| a.id.0);
            let count = ids.clone().count();
            let lowest = ids.next().map_or(u8::MAX, |id| id);
            (count, std::cmp::Reverse(lowest))
        })?;
        Some(EdgeId(best.1))
    }
}

impl AdversaryStrategy for FrontierBlocker {
    fn name(&self) -> String {
        match self.release {
            None => "frontier_blocker(permanent)".into(),
            Some(t) => format!("frontier_blocker(release={t})"),
        }
    }

    fn choose(&mut self, world: &WorldState) -> RoundEdgeSet {
        let edge = self.frontier_edge(world);
        if let Some(t) = self.release {
            if world.round % t == t - 1 {
                return RoundEdgeSet::ALL_PRESENT;
            }
        }
        RoundEdgeSet { missing: edge }
    }

    fn permanent_removal(&self) -> bool {
        self.release.is_none()
    }
}

/// Holds the leader's clockwise edge closed until the retroguard finishes a
/// swing, then opens it for a single round.
#[derive(Debug, Clone, Default)]
pub struct PendulumStaller {
    reports_seen: Option<u32>,
}

pub fn pendulum_staller() -> PendulumStaller {
    PendulumStaller::default()
}

impl AdversaryStrategy for PendulumStaller {
    fn name(&self) -> String {
        "pendulum_staller".into()
    }

    fn choose(&mut self, world: &WorldState) -> RoundEdgeSet {
        let leader = world
            .agents
            .iter()
            .find(|a| a.is_active() && matches!(a.role, Role::Leader | Role::MLeader));
        let Some(l) = leader else {
            self.reports_seen = None;
            return RoundEdgeSet::ALL_PRESENT;
        };
        let reports = l.pendulum.reports;
        match self.reports_seen {
            Some(seen) if reports > seen => {
                self.reports_seen = Some(reports);
                RoundEdgeSet::ALL_PRESENT
            }
            _ => {
                self.reports_seen.get_or_insert(reports);
                RoundEdgeSet::without(world.cfg.incident_edge(l.position, Direction::Right))
            }
        }
    }
}

/// Removes a random edge with probability `p_block` each round.
#[derive(Debug, Clone)]
pub struct RandomAdversary {
    pub seed: u64,
    pub p_block: f64,
    /// Pick among edges next to alive agents instead of all edges.
    pub biased: bool,
    rng: ChaCha8Rng,
}

pub fn random_adversary(seed: u64, p_block: f64) -> RandomAdversary {
    RandomAdversary {
        seed,
        p_block: p_block.clamp(0.0, 1.0),
        biased: false,
        rng: ChaCha8Rng::seed_from_u64(seed),
    }
}

impl AdversaryStrategy for RandomAdversary {
    fn name(&self) -> String {
        format!(
            "random(seed={},p={}{})",
            self.seed,
            self.p_block,
            if self.biased { ",biased" } else { "" }
        )
    }

    fn choose(&mut self, world: &WorldState) -> RoundEdgeSet {
        if self.p_block <= 0.0 || !self.rng.gen_bool(self.p_block) {
            return RoundEdgeSet::ALL_PRESENT;
        }
        let cfg = &world.cfg;
        if self.biased {
            let mut near: Vec<EdgeId> = world
                .agents
                .iter()
                .filter(|a| a.is_active())
                .flat_map(|a| {
                    [Direction::Right, Direction::Left].map(|d| cfg.incident_edge(a.position, d))
                })
                .collect();
            near.sort();
            near.dedup();
            if !near.is_empty() {
                return RoundEdgeSet::without(near[self.rng.gen_range(0..near.len())]);
            }
        }
        RoundEdgeSet::without(EdgeId(self.rng.gen_range(0..cfg.n())))
    }
}

/// Oblivious, pre-committed schedule; all edges present after it runs out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub missing: Vec<Option<usize>>,
}

impl Schedule {
    pub fn new(missing: Vec<Option<usize>>) -> Self {
        Self { missing }
    }
}

impl AdversaryStrategy for Schedule {
    fn name(&self) -> String {
        format!("schedule({} rounds)", self.missing.len())
    }

    fn choose(&mut self, world: &WorldState) -> RoundEdgeSet {
        let e = self.missing.get(world.round as usize).copied().flatten();
        RoundEdgeSet {
            missing: e.map(|e| EdgeId(e % world.cfg.n())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{count} schedules exceed the budget of {budget}")]
pub struct BudgetExceeded {
    pub count: u128,
    pub budget: u128,
}

/// Every sequence of `depth` edge sets, in lexicographic order with
/// "all present" first.
pub fn enumerate_adversaries(
    cfg: &RingConfig,
    depth: usize,
    budget: u128,
) -> Result<impl Iterator<Item = Vec<Option<usize>>>, BudgetExceeded> {
    let choices = cfg.n() as u128 + 1;
    let count = choices.checked_pow(depth as u32).ok_or(BudgetExceeded {
        count: u128::MAX,
        budget,
    })?;
    if count > budget {
        return Err(BudgetExceeded { count, budget });
    }
    let n = cfg.n();
    Ok((0..count).map(move |mut k| {
        let mut s = vec![None; depth];
        for slot in s.iter_mut().rev() {
            let c = (k % (n as u128 + 1)) as usize;
            k /= n as u128 + 1;
            *slot = c.checked_sub(1);
        }
        s
    }))
}
