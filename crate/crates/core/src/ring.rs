//! The oriented dynamic ring: footprint, black hole and per-round edge sets.
//!
//! Node `v_i` is joined to `v_{i+1 mod n}` by edge `i`. "Right" is clockwise
//! (index + 1), "left" is counter-clockwise (index - 1). Every protocol in the
//! crate explores clockwise; nothing ever re-derives the orientation.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest ring for which the problem is non-trivial.
pub const MIN_RING_SIZE: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RingError {
    #[error("ring size {0} is below the minimum of {MIN_RING_SIZE}")]
    TooSmall(usize),
    #[error("black hole index {bh} is outside a ring of {n} nodes")]
    BlackHoleOutOfRange { n: usize, bh: usize },
    #[error("edge {edge} does not exist in a ring of {n} nodes")]
    EdgeOutOfRange { n: usize, edge: usize },
}

/// Port direction on the oriented ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Clockwise, index + 1.
    Right,
    /// Counter-clockwise, index - 1.
    Left,
}

impl Direction {
    pub fn opposite(self) -> Self {
        match self {
            Direction::Right => Direction::Left,
            Direction::Left => Direction::Right,
        }
    }

    /// Signed displacement of one step in this direction.
    pub fn delta(self) -> i64 {
        match self {
            Direction::Right => 1,
            Direction::Left => -1,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Right => f.write_str("right"),
            Direction::Left => f.write_str("left"),
        }
    }
}

/// Canonical name of footprint edge `(v_i, v_{i+1})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub usize);

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Static parameters of a ring instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingConfig {
    n: usize,
    bh_index: usize,
}

impl RingConfig {
    pub fn new(n: usize, bh_index: usize) -> Result<Self, RingError> {
        if n < MIN_RING_SIZE {
            return Err(RingError::TooSmall(n));
        }
        if bh_index >= n {
            return Err(RingError::BlackHoleOutOfRange { n, bh: bh_index });
        }
        Ok(Self { n, bh_index })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bh_index(&self) -> usize {
        self.bh_index
    }

    pub fn neighbor(&self, v: usize, dir: Direction) -> usize {
        debug_assert!(v < self.n);
        match dir {
            Direction::Right => (v + 1) % self.n,
            Direction::Left => (v + self.n - 1) % self.n,
        }
    }

    /// The edge an agent on `v` traverses when moving in `dir`.
    pub fn incident_edge(&self, v: usize, dir: Direction) -> EdgeId {
        match dir {
            Direction::Right => EdgeId(v),
            Direction::Left => EdgeId((v + self.n - 1) % self.n),
        }
    }

    /// Node reached from `v` after `steps` signed clockwise steps.
    pub fn offset(&self, v: usize, steps: i64) -> usize {
        let n = self.n as i64;
        (((v as i64 + steps) % n + n) % n) as usize
    }

    /// Clockwise distance from `from` to `to`, in `[0, n)`.
    pub fn cw_distance(&self, from: usize, to: usize) -> usize {
        (to + self.n - from) % self.n
    }

    /// Counter-clockwise neighbour of the black hole: the node a correct
    /// Phase-1 death always leaves marked.
    pub fn ccw_bh_neighbor(&self) -> usize {
        self.neighbor(self.bh_index, Direction::Left)
    }

    pub fn edge(&self, index: usize) -> Result<EdgeId, RingError> {
        if index < self.n {
            Ok(EdgeId(index))
        } else {
            Err(RingError::EdgeOutOfRange {
                n: self.n,
                edge: index,
            })
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.n).map(EdgeId)
    }
}

/// The edges present in one round.
///
/// A ring footprint stays connected after losing any single edge, so the only
/// representable states are "all present" and "exactly one missing".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RoundEdgeSet {
    pub missing: Option<EdgeId>,
}

impl RoundEdgeSet {
    pub const ALL_PRESENT: RoundEdgeSet = RoundEdgeSet { missing: None };

    pub fn without(edge: EdgeId) -> Self {
        Self {
            missing: Some(edge),
        }
    }

    /// Builds an edge set from an explicit list of removed edges, rejecting
    /// anything that would break 1-interval connectivity.
    pub fn from_removed(cfg: &RingConfig, removed: &[usize]) -> Result<Self, EdgeSetError> {
        match removed {
            [] => Ok(Self::ALL_PRESENT),
            [e] => Ok(Self::without(cfg.edge(*e)?)),
            more => Err(EdgeSetError::TooManyMissing(more.len())),
        }
    }

    pub fn edge_present(&self, e: EdgeId) -> bool {
        self.missing != Some(e)
    }

    pub fn validate(&self, cfg: &RingConfig) -> Result<(), EdgeSetError> {
        if let Some(e) = self.missing {
            cfg.edge(e.0)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EdgeSetError {
    #[error("{0} edges missing in one round; a dynamic ring allows at most one")]
    TooManyMissing(usize),
    #[error(transparent)]
    Ring(#[from] RingError),
}

/// Free-function form of [`RoundEdgeSet::edge_present`].
pub fn edge_present(edges: &RoundEdgeSet, e: EdgeId) -> bool {
    edges.edge_present(e)
}

/// Free-function form of [`RingConfig::neighbor`].
pub fn neighbor(cfg: &RingConfig, v: usize, dir: Direction) -> usize {
    cfg.neighbor(v, dir)
}

/// Free-function form of [`RingConfig::ccw_bh_neighbor`].
pub fn ccw_bh_neighbor(cfg: &RingConfig) -> usize {
    cfg.ccw_bh_neighbor()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn edge_presence() {
        assert!(edge_present(&RoundEdgeSet::ALL_PRESENT, EdgeId(3)));
        assert!(!edge_present(&RoundEdgeSet::without(EdgeId(3)), EdgeId(3)));
        assert!(edge_present(&RoundEdgeSet::without(EdgeId(3)), EdgeId(2)));
    }

    #[test]
    fn neighbours_wrap() {
        let five = RingConfig::new(5, 0).unwrap();
        assert_eq!(neighbor(&five, 4, Direction::Right), 0);
        assert_eq!(neighbor(&five, 0, Direction::Left), 4);
        let eight = RingConfig::new(8, 0).unwrap();
        assert_eq!(neighbor(&eight, 3, Direction::Right), 4);
    }

    #[test]
    fn ccw_neighbour_of_black_hole() {
        assert_eq!(ccw_bh_neighbor(&RingConfig::new(5, 0).unwrap()), 4);
        assert_eq!(ccw_bh_neighbor(&RingConfig::new(6, 3).unwrap()), 2);
        assert_eq!(ccw_bh_neighbor(&RingConfig::new(4, 1).unwrap()), 0);
    }

    #[test]
    fn config_validation() {
        assert_eq!(RingConfig::new(3, 0), Err(RingError::TooSmall(3)));
        assert_eq!(
            RingConfig::new(4, 4),
            Err(RingError::BlackHoleOutOfRange { n: 4, bh: 4 })
        );
    }

    #[test]
    fn at_most_one_missing_edge() {
        let cfg = RingConfig::new(6, 2).unwrap();
        assert_eq!(
            RoundEdgeSet::from_removed(&cfg, &[1, 2]),
            Err(EdgeSetError::TooManyMissing(2))
        );
        assert_eq!(
            RoundEdgeSet::from_removed(&cfg, &[4]).unwrap().missing,
            Some(EdgeId(4))
        );
        assert!(RoundEdgeSet::from_removed(&cfg, &[6]).is_err());
    }

    proptest! {
        #[test]
        fn incident_edges_join_neighbours(n in 4usize..40, v in 0usize..40) {
            let cfg = RingConfig::new(n, 0).unwrap();
            let v = v % n;
            let right = cfg.incident_edge(v, Direction::Right);
            let left_of_next = cfg.incident_edge(cfg.neighbor(v, Direction::Right), Direction::Left);
            prop_assert_eq!(right, left_of_next);
            prop_assert_eq!(cfg.neighbor(cfg.neighbor(v, Direction::Left), Direction::Right), v);
        }

        #[test]
        fn single_removal_keeps_ring_connected(n in 4usize..40, e in 0usize..40) {
            let cfg = RingConfig::new(n, 0).unwrap();
            let edges = RoundEdgeSet::without(EdgeId(e % n));
            // Walk clockwise from the node after the missing edge; every node is
            // reached without crossing it.
            let start = (e % n + 1) % n;
            let mut seen = vec![false; n];
            let mut v = start;
            seen[v] = true;
            for _ in 0..n - 1 {
                let edge = cfg.incident_edge(v, Direction::Right);
                prop_assert!(edges.edge_present(edge));
                v = cfg.neighbor(v, Direction::Right);
                seen[v] = true;
            }
            prop_assert!(seen.iter().all(|s| *s));
        }
    }
}
