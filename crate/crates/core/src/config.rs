//! Flat key-value run and sweep configuration files.
//!
//! Every key is optional. A run config looks like:
//!
//! ```toml
//! n = 8
//! bh_index = 0
//! starts = "spread"          # spread | colocated | colocated(v) | random(seed) | "a,b,c"
//! protocol = "gather_and_locate"
//! adversary = "frontier_blocker"
//! release = 8                # frontier_blocker period; 0 blocks permanently
//! horizon = 0                # 0 means bound_factor * n^2
//! reference = "role_assignment"
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AdversarySpec;
use crate::protocols::{Protocol, Reading};
use crate::ring::{RingConfig, RingError};
use crate::verifier::DEFAULT_BOUND_FACTOR;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("cannot parse config: {0}")]
    Toml(String),
    #[error("bad value for `{key}`: {msg}")]
    Value { key: &'static str, msg: String },
    #[error("start node {0} is the black hole")]
    StartOnBlackHole(usize),
    #[error("start nodes {0:?} must be pairwise distinct or all equal")]
    StartsOverlap([usize; 3]),
    #[error("CautiousPendulum starts with all agents on one node")]
    PendulumNotColocated,
}

fn bad(key: &'static str, msg: impl fmt::Display) -> ConfigError {
    ConfigError::Value {
        key,
        msg: msg.to_string(),
    }
}

/// How the three start nodes are chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    /// Evenly spread clockwise from the black hole.
    Spread,
    /// All on one node; `None` means the black hole's clockwise neighbour.
    Colocated(Option<usize>),
    /// Three distinct non-black-hole nodes drawn with this seed.
    Random(u64),
    Explicit([usize; 3]),
}

impl Placement {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        let s = s.trim();
        let arg = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .map(str::trim)
        };
        if s == "spread" {
            return Ok(Placement::Spread);
        }
        if s == "colocated" {
            return Ok(Placement::Colocated(None));
        }
        if let Some(v) = arg("colocated") {
            return v
                .parse()
                .map(|v| Placement::Colocated(Some(v)))
                .map_err(|e| bad("starts", e));
        }
        if let Some(seed) = arg("random") {
            return seed
                .parse()
                .map(Placement::Random)
                .map_err(|e| bad("starts", e));
        }
        let nodes: Vec<usize> = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad("starts", e))?;
        let nodes: [usize; 3] = nodes
            .try_into()
            .map_err(|v: Vec<usize>| bad("starts", format!("need 3 nodes, got {}", v.len())))?;
        Ok(Placement::Explicit(nodes))
    }

    pub fn resolve(&self, cfg: &RingConfig) -> Result<[usize; 3], ConfigError> {
        let n = cfg.n();
        let bh = cfg.bh_index();
        let starts = match *self {
            Placement::Spread => {
                let k = (n - 1) / 3;
                [1, 1 + k, 1 + 2 * k].map(|d| cfg.offset(bh, d as i64))
            }
            Placement::Colocated(v) => [v.unwrap_or((bh + 1) % n); 3],
            Placement::Random(seed) => random_starts(cfg, seed),
            Placement::Explicit(s) => s,
        };
        for s in starts {
            if s >= n {
                return Err(bad("starts", format!("node {s} outside a ring of {n}")));
            }
            if s == bh {
                return Err(ConfigError::StartOnBlackHole(s));
            }
        }
        let distinct: BTreeSet<_> = starts.iter().collect();
        if distinct.len() == 2 {
            return Err(ConfigError::StartsOverlap(starts));
        }
        Ok(starts)
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Placement::Spread => f.write_str("spread"),
            Placement::Colocated(None) => f.write_str("colocated"),
            Placement::Colocated(Some(v)) => write!(f, "colocated({v})"),
            Placement::Random(s) => write!(f, "random({s})"),
            Placement::Explicit([a, b, c]) => write!(f, "{a},{b},{c}"),
        }
    }
}

/// Three distinct nodes other than the black hole.
pub fn random_starts(cfg: &RingConfig, seed: u64) -> [usize; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<usize> = (0..cfg.n()).filter(|&v| v != cfg.bh_index()).collect();
    nodes.shuffle(&mut rng);
    [nodes[0], nodes[1], nodes[2]]
}

/// Every ordered triple of distinct non-black-hole nodes.
pub fn all_placements(cfg: &RingConfig) -> Vec<[usize; 3]> {
    let nodes: Vec<usize> = (0..cfg.n()).filter(|&v| v != cfg.bh_index()).collect();
    let mut out = Vec::new();
    for &a in &nodes {
        for &b in &nodes {
            for &c in &nodes {
                if a != b && b != c && a != c {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

/// Parses one adversary name with optional parameters, e.g.
/// `frontier_blocker(release=8)` or `random(p=0.9,biased,seed=3)`.
pub fn parse_adversary(s: &str) -> Result<AdversarySpec, ConfigError> {
    let s = s.trim();
    let (name, args) = match s.split_once('(') {
        Some((name, rest)) => (
            name.trim(),
            rest.strip_suffix(')')
                .ok_or_else(|| bad("adversary", format!("unbalanced `{s}`")))?,
        ),
        None => (s, ""),
    };
    let mut kv = Vec::new();
    for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('=') {
            Some((k, v)) => kv.push((k.trim(), v.trim())),
            None => kv.push((part, "")),
        }
    }
    let get = |k: &str| kv.iter().find(|(key, _)| *key == k).map(|(_, v)| *v);
    let num = |k: &str, default: u64| -> Result<u64, ConfigError> {
        get(k).map_or(Ok(default), |v| v.parse().map_err(|e| bad("adversary", e)))
    };
    Ok(match name {
        "static" => AdversarySpec::Static,
        "frontier_blocker" => {
            let t = match get("release") {
                None | Some("permanent") => 0,
                Some(v) => v.parse().map_err(|e| bad("adversary", e))?,
            };
            AdversarySpec::FrontierBlocker {
                release: (t > 0).then_some(t),
            }
        }
        "pendulum_staller" => AdversarySpec::PendulumStaller,
        "random" => AdversarySpec::Random {
            seed: num("seed", 0)?,
            p_block: get("p")
                .map_or(Ok(0.5), |v| v.parse::<f64>())
                .map_err(|e| bad("adversary", e))?,
            biased: get("biased").is_some(),
        },
        "schedule" => AdversarySpec::Schedule {
            missing: parse_schedule(get("edges").unwrap_or(""))?,
        },
        other => return Err(bad("adversary", format!("unknown adversary `{other}`"))),
    })
}

/// `"2,-,3"` → `[Some(2), None, Some(3)]`; whitespace or `;` also separate.
pub fn parse_schedule(s: &str) -> Result<Vec<Option<usize>>, ConfigError> {
    s.split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| match t {
            "-" | "none" => Ok(None),
            e => e.parse().map(Some).map_err(|e| bad("schedule", e)),
        })
        .collect()
}

pub fn format_schedule(s: &[Option<usize>]) -> String {
    s.iter()
        .map(|e| e.map_or("-".to_string(), |e| e.to_string()))
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub bh_index: usize,
    pub starts: String,
    pub protocol: Protocol,
    /// static | frontier_blocker | pendulum_staller | random | schedule,
    /// optionally with inline parameters.
    pub adversary: String,
    /// frontier_blocker release period; 0 blocks permanently.
    pub release: u64,
    pub seed: u64,
    pub p_block: f64,
    pub biased: bool,
    /// Missing edge per round for `schedule`, `-` for none.
    pub schedule: String,
    /// 0 means `bound_factor · n²`.
    pub horizon: u64,
    pub bound_factor: u64,
    pub reference: Reading,
    pub trace_out: String,
    pub verdict_out: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 8,
            bh_index: 0,
            starts: "spread".into(),
            protocol: Protocol::GatherAndLocate,
            adversary: "static".into(),
            release: 0,
            seed: 0,
            p_block: 0.5,
            biased: false,
            schedule: String::new(),
            horizon: 0,
            bound_factor: DEFAULT_BOUND_FACTOR,
            reference: Reading::default(),
            trace_out: String::new(),
            verdict_out: String::new(),
        }
    }
}

/// A fully resolved, validated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub ring: RingConfig,
    pub starts: [usize; 3],
    pub protocol: Protocol,
    pub reading: Reading,
    pub adversary: AdversarySpec,
    pub horizon: u64,
    pub bound_factor: u64,
}

impl RunSpec {
    pub fn new(
        ring: RingConfig,
        starts: [usize; 3],
        protocol: Protocol,
        adversary: AdversarySpec,
    ) -> Self {
        let n = ring.n() as u64;
        Self {
            ring,
            starts,
            protocol,
            reading: Reading::default(),
            adversary,
            horizon: DEFAULT_BOUND_FACTOR * n * n,
            bound_factor: DEFAULT_BOUND_FACTOR,
        }
    }
}

impl RunConfig {
    pub fn from_toml(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Toml(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    /// Applies a `key=value` override using the file syntax for the value.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Toml(format!("expected key=value, got `{assignment}`")))?;
        let v = v.trim();
        let quoted =
            if v.parse::<f64>().is_ok() || v == "true" || v == "false" || v.starts_with('"') {
                v.to_string()
            } else {
                format!("{v:?}")
            };
        let mut table: toml::Table =
            toml::from_str(&self.to_toml()).map_err(|e| ConfigError::Toml(e.to_string()))?;
        let one: toml::Table = toml::from_str(&format!("{} = {quoted}", k.trim()))
            .map_err(|e| ConfigError::Toml(e.to_string()))?;
        table.extend(one);
        *self = toml::from_str(&toml::to_string(&table).expect("table serializes"))
            .map_err(|e| ConfigError::Toml(e.to_string()))?;
        Ok(())
    }

    pub fn adversary_spec(&self) -> Result<AdversarySpec, ConfigError> {
        let spec = parse_adversary(&self.adversary)?;
        let inline = self.adversary.contains('(');
        Ok(match spec {
            AdversarySpec::FrontierBlocker { .. } if !inline => AdversarySpec::FrontierBlocker {
                release: (self.release > 0).then_some(self.release),
            },
            AdversarySpec::Random { .. } if !inline => {
                if !(0.0..=1.0).contains(&self.p_block) {
                    return Err(bad("p_block", "must lie in [0, 1]"));
                }
                AdversarySpec::Random {
                    seed: self.seed,
                    p_block: self.p_block,
                    biased: self.biased,
                }
            }
            AdversarySpec::Schedule { missing } if missing.is_empty() => AdversarySpec::Schedule {
                missing: parse_schedule(&self.schedule)?,
            },
            other => other,
        })
    }

    pub fn resolve(&self) -> Result<RunSpec, ConfigError> {
        let ring = RingConfig::new(self.n, self.bh_index)?;
        let starts = Placement::parse(&self.starts)?.resolve(&ring)?;
        let colocated = starts.iter().all(|&s| s == starts[0]);
        if self.protocol == Protocol::CautiousPendulum && !colocated {
            return Err(ConfigError::PendulumNotColocated);
        }
        if self.bound_factor == 0 {
            return Err(bad("bound_factor", "must be positive"));
        }
        let n = self.n as u64;
        Ok(RunSpec {
            ring,
            starts,
            protocol: self.protocol,
            reading: self.reference,
            adversary: self.adversary_spec()?,
            horizon: if self.horizon == 0 {
                self.bound_factor * n * n
            } else {
                self.horizon
            },
            bound_factor: self.bound_factor,
        })
    }
}

/// `"4..16"` (inclusive), `"4,6,9"` or `"7"`.
pub fn parse_range(key: &'static str, s: &str) -> Result<Vec<u64>, ConfigError> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let a: u64 = a.trim().parse().map_err(|e| bad(key, e))?;
        let b: u64 = b.trim().parse().map_err(|e| bad(key, e))?;
        return Ok(RangeInclusive::new(a, b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|e| bad(key, e)))
        .collect()
}

/// Cartesian sweep over ring sizes, black-hole positions, placements,
/// adversaries and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub ns: String,
    /// `all` or a list of black-hole indices (taken modulo `n`).
    pub bh: String,
    /// Placements per `(n, bh)`; all of them when there are fewer.
    pub placements: usize,
    pub placement_seed: u64,
    /// Colocated starts on every non-black-hole node instead of scattered.
    pub colocated: bool,
    pub protocol: Protocol,
    pub reference: Reading,
    /// Comma-separated adversary names, e.g.
    /// `static,frontier_blocker(release=n),random(p=0.5)`.
    pub adversaries: String,
    /// Seeds for the randomized adversaries.
    pub seeds: String,
    pub bound_factor: u64,
    /// Maximum number of runs.
    pub budget: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ns: "4..8".into(),
            bh: "all".into(),
            placements: 20,
            placement_seed: 0,
            colocated: false,
            protocol: Protocol::GatherAndLocate,
            reference: Reading::default(),
            adversaries: "static".into(),
            seeds: "0".into(),
            bound_factor: DEFAULT_BOUND_FACTOR,
            budget: 5_000_000,
        }
    }
}

impl SweepConfig {
    pub fn from_toml(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Toml(e.to_string()))
    }

    /// Adversary templates; `release=n` is substituted per ring size.
    pub fn adversaries_for(&self, n: usize) -> Result<Vec<AdversarySpec>, ConfigError> {
        split_top_level(&self.adversaries)
            .into_iter()
            .map(|a| parse_adversary(&a.replace("release=n", &format!("release={n}"))))
            .collect()
    }
}

/// Splits on commas that are not inside parentheses.
fn split_top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur).trim().to_string());
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out.retain(|s| !s.is_empty());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
        let spec = RunConfig::default().resolve().unwrap();
        assert_eq!(spec.horizon, 50 * 64);
        assert_eq!(spec.adversary, AdversarySpec::Static);
    }

    #[test]
    fn start_on_black_hole_is_rejected() {
        let c = RunConfig::from_toml("n = 6\nbh_index = 2\nstarts = \"0,2,4\"").unwrap();
        assert_eq!(c.resolve(), Err(ConfigError::StartOnBlackHole(2)));
    }

    #[test]
    fn partial_overlap_is_rejected() {
        let c = RunConfig::from_toml("starts = \"1,1,4\"").unwrap();
        assert!(matches!(c.resolve(), Err(ConfigError::StartsOverlap(_))));
    }

    #[test]
    fn minimal_ring() {
        let c = RunConfig::from_toml("n = 4\nbh_index = 3").unwrap();
        assert_eq!(c.resolve().unwrap().starts, [0, 1, 2]);
        assert!(RunConfig::from_toml("n = 3").unwrap().resolve().is_err());
    }

    #[test]
    fn unknown_keys_are_refused() {
        assert!(RunConfig::from_toml("nodes = 5").is_err());
    }

    #[test]
    fn pendulum_needs_colocation() {
        let c = RunConfig::from_toml("protocol = \"cautious_pendulum\"").unwrap();
        assert_eq!(c.resolve(), Err(ConfigError::PendulumNotColocated));
        let c = RunConfig::from_toml("protocol = \"cautious_pendulum\"\nstarts = \"colocated(5)\"")
            .unwrap();
        assert_eq!(c.resolve().unwrap().starts, [5, 5, 5]);
    }

    #[test]
    fn adversary_names() {
        assert_eq!(
            parse_adversary("frontier_blocker(release=8)").unwrap(),
            AdversarySpec::FrontierBlocker { release: Some(8) }
        );
        assert_eq!(
            parse_adversary("frontier_blocker").unwrap(),
            AdversarySpec::FrontierBlocker { release: None }
        );
        assert_eq!(
            parse_adversary("random(p=0.9,biased)").unwrap(),
            AdversarySpec::Random {
                seed: 0,
                p_block: 0.9,
                biased: true
            }
        );
        assert!(parse_adversary("chaos").is_err());
        let c = RunConfig {
            adversary: "frontier_blocker".into(),
            release: 5,
            ..RunConfig::default()
        };
        assert_eq!(
            c.adversary_spec().unwrap(),
            AdversarySpec::FrontierBlocker { release: Some(5) }
        );
    }

    #[test]
    fn schedules_round_trip() {
        let s = parse_schedule("2,-,3 none").unwrap();
        assert_eq!(s, vec![Some(2), None, Some(3), None]);
        assert_eq!(parse_schedule(&format_schedule(&s)).unwrap(), s);
    }

    #[test]
    fn overrides() {
        let mut c = RunConfig::default();
        c.set("n=12").unwrap();
        c.set("adversary=random(p=0.9)").unwrap();
        c.set("reference=last_meeting").unwrap();
        assert_eq!(c.n, 12);
        assert_eq!(c.reference, Reading::LastMeeting);
        assert!(c.set("bogus=1").is_err());
    }

    #[test]
    fn ranges_and_lists() {
        assert_eq!(parse_range("ns", "4..7").unwrap(), vec![4, 5, 6, 7]);
        assert_eq!(parse_range("ns", "4, 9").unwrap(), vec![4, 9]);
        assert!(parse_range("seeds", "").unwrap().is_empty());
        let s = SweepConfig {
            adversaries: "static, frontier_blocker(release=n), random(p=0.5,biased)".into(),
            ..SweepConfig::default()
        };
        assert_eq!(
            s.adversaries_for(6).unwrap()[1],
            AdversarySpec::FrontierBlocker { release: Some(6) }
        );
        assert_eq!(s.adversaries_for(6).unwrap().len(), 3);
    }

    #[test]
    fn placements() {
        let ring = RingConfig::new(5, 1).unwrap();
        assert_eq!(all_placements(&ring).len(), 24);
        let r = random_starts(&ring, 9);
        assert!(r.iter().all(|&s| s != 1));
        assert_eq!(r, random_starts(&ring, 9));
        assert_eq!(Placement::Spread.resolve(&ring).unwrap(), [2, 3, 4]);
    }
}
