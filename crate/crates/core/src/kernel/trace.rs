//! Event log of a run and its line-delimited JSON encoding.
//!
//! A trace file is one header line followed by one line per event. Within a
//! round events appear in this order: `Round` (the edge set), `EnterBH`,
//! `Meet`, `StateChange`/`RoleChange` as agents settle, `Terminate`, pebble
//! operations by ascending agent id, then `Move`/`Blocked`/`Wait` by
//! ascending agent id.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::agent::{AgentId, Role};
use crate::protocols::{ProtoState, Protocol, Reading};
use crate::ring::Direction;

pub const TRACE_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: u32,
    pub n: usize,
    pub bh_index: usize,
    pub starts: Vec<usize>,
    pub protocol: Protocol,
    pub reading: Reading,
    pub adversary: String,
    /// The adversary can keep one edge missing forever.
    pub permanent_removal: bool,
    pub horizon: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationKind {
    /// The black hole is the clockwise neighbour of the reporter's node.
    NextClockwise,
    /// The retroguard failed to report.
    FailedReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    Round {
        missing: Option<usize>,
    },
    Move {
        from: usize,
        to: usize,
        dir: Direction,
    },
    Blocked {
        at: usize,
        dir: Direction,
    },
    Wait {
        at: usize,
    },
    PlacePebble {
        at: usize,
    },
    TakePebble {
        at: usize,
    },
    Meet {
        other: AgentId,
        at: usize,
    },
    #[serde(rename = "EnterBH")]
    EnterBh {
        at: usize,
        with_pebble: bool,
    },
    Terminate {
        at: usize,
        report: usize,
        via: TerminationKind,
    },
    StateChange {
        from: ProtoState,
        to: ProtoState,
    },
    RoleChange {
        from: Role,
        to: Role,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub round: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentId>,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace is empty")]
    Empty,
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("unsupported trace format {0}")]
    Format(u32),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Trace {
    pub fn new(header: TraceHeader) -> Self {
        Self {
            header,
            events: Vec::new(),
        }
    }

    /// Number of rounds executed (one `Round` record per round).
    pub fn rounds(&self) -> u64 {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Round { .. }))
            .count() as u64
    }

    pub fn missing_edges(&self) -> Vec<Option<usize>> {
        self.events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Round { missing } => Some(missing),
                _ => None,
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, TraceError> {
        let mut lines = r
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let (_, first) = lines.next().ok_or(TraceError::Empty)?;
        let header: TraceHeader = serde_json::from_str(&first?)
            .map_err(|source| TraceError::Parse { line: 1, source })?;
        if header.format != TRACE_FORMAT {
            return Err(TraceError::Format(header.format));
        }
        let mut events = Vec::new();
        for (i, line) in lines {
            let e = serde_json::from_str(&line?).map_err(|source| TraceError::Parse {
                line: i + 1,
                source,
            })?;
            events.push(e);
        }
        Ok(Self { header, events })
    }

    pub fn from_jsonl(s: &str) -> Result<Self, TraceError> {
        Self::read_jsonl(s.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> TraceHeader {
        TraceHeader {
            format: TRACE_FORMAT,
            n: 5,
            bh_index: 2,
            starts: vec![0, 3, 4],
            protocol: Protocol::GatherAndLocate,
            reading: Reading::RoleAssignment,
            adversary: "static".into(),
            permanent_removal: false,
            horizon: 1250,
        }
    }

    #[test]
    fn event_line_shape() {
        let e = TraceEvent {
            round: 7,
            agent: Some(AgentId(1)),
            kind: EventKind::Move {
                from: 3,
                to: 4,
                dir: Direction::Right,
            },
        };
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"round":7,"agent":1,"kind":"Move","from":3,"to":4,"dir":"right"}"#
        );
        let r = TraceEvent {
            round: 0,
            agent: None,
            kind: EventKind::Round { missing: Some(2) },
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"round":0,"kind":"Round","missing":2}"#
        );
    }

    #[test]
    fn jsonl_round_trip() {
        let mut t = Trace::new(header());
        t.events.push(TraceEvent {
            round: 0,
            agent: None,
            kind: EventKind::Round { missing: None },
        });
        t.events.push(TraceEvent {
            round: 0,
            agent: Some(AgentId(2)),
            kind: EventKind::EnterBh {
                at: 2,
                with_pebble: true,
            },
        });
        t.events.push(TraceEvent {
            round: 0,
            agent: Some(AgentId(0)),
            kind: EventKind::StateChange {
                from: ProtoState::Init,
                to: ProtoState::Wait,
            },
        });
        let text = t.to_jsonl();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(Trace::from_jsonl(&text).unwrap(), t);
        assert_eq!(t.rounds(), 1);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(Trace::from_jsonl(""), Err(TraceError::Empty)));
        let bad = format!("{}\nnot json\n", serde_json::to_string(&header()).unwrap());
        assert!(matches!(
            Trace::from_jsonl(&bad),
            Err(TraceError::Parse { line: 2, .. })
        ));
    }
}
