//! Space-time diagrams of a trace: a fixed-width text grid, which is the
//! form compared in tests, and an SVG drawing.
//!
//! Rounds run downwards, ring nodes run left to right. In the text form each
//! node takes a three-character cell `[pebble][agent][note]`:
//!
//! ```text
//! pebble  .  none   o  one      2, 3  several
//! agent   .  none   0-2  id     *  several
//! note       none   m  meeting  b  blocked   T  terminated   x  died
//! ```
//!
//! The black hole column is filled with `#`. Cells are separated by the edge
//! between them, `|` when the adversary removed it that round. The wrap-around
//! edge is drawn at both ends of the row.

use std::fmt::Write as _;

use crate::kernel::{EventKind, Trace, TraceEvent, AGENT_COUNT};
use crate::verifier::{walk, Replay};

pub const DEFAULT_PAGE_ROWS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Row {
    round: u64,
    missing: Option<usize>,
    position: Vec<usize>,
    alive: Vec<bool>,
    pebbles: Vec<u8>,
    notes: Vec<Option<char>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Annotation {
    round: u64,
    text: String,
}

fn note_rank(c: char) -> u8 {
    match c {
        'x' => 4,
        'T' => 3,
        'b' => 2,
        'm' => 1,
        _ => 0,
    }
}

fn collect(trace: &Trace) -> (Vec<Row>, Vec<Annotation>) {
    let mut rows = Vec::new();
    let mut notes_of = Vec::new();
    let mut ignored = Vec::new();
    walk(
        trace,
        &mut ignored,
        |_, _, _| {},
        |r, evs: &[TraceEvent], before: &Replay, after: &Replay, _| {
            let n = after.cfg.n();
            let mut notes: Vec<Option<char>> = vec![None; n];
            let mut mark = |v: usize, c: char| {
                if notes[v].is_none_or(|old| note_rank(old) < note_rank(c)) {
                    notes[v] = Some(c);
                }
            };
            let mut missing = None;
            for e in evs {
                let who = e.agent.map(|a| a.to_string()).unwrap_or_default();
                match &e.kind {
                    EventKind::Round { missing: m } => missing = *m,
                    EventKind::Meet { at, .. } => mark(*at, 'm'),
                    EventKind::Blocked { at, .. } => mark(*at, 'b'),
                    EventKind::EnterBh { at, .. } => {
                        mark(*at, 'x');
                        notes_of.push(Annotation {
                            round: r,
                            text: format!("{who} destroyed by the black hole at node {at}"),
                        });
                    }
                    EventKind::Terminate { at, report, via } => {
                        mark(*at, 'T');
                        let via = serde_json::to_value(via).expect("unit variant");
                        notes_of.push(Annotation {
                            round: r,
                            text: format!(
                                "{who} terminates at node {at} reporting node {report} ({})",
                                via.as_str().unwrap_or("?")
                            ),
                        });
                    }
                    _ => {}
                }
            }
            let mut pebbles = vec![0u8; n];
            for v in after.pebble_at.iter().flatten() {
                pebbles[*v] += 1;
            }
            rows.push(Row {
                round: r,
                missing,
                position: after.position.clone(),
                alive: before.alive.clone(),
                pebbles,
                notes,
            });
        },
    );
    (rows, notes_of)
}

fn edge_glyph(missing: Option<usize>, e: usize) -> char {
    if missing == Some(e) {
        '|'
    } else {
        ' '
    }
}

fn render_row(out: &mut String, row: &Row, n: usize, bh: usize) {
    write!(out, "{:>6} ", row.round).unwrap();
    out.push(edge_glyph(row.missing, n - 1));
    for v in 0..n {
        let here: Vec<usize> = (0..AGENT_COUNT)
            .filter(|&i| row.alive[i] && row.position[i] == v)
            .collect();
        let agent = match here.as_slice() {
            [] if v == bh => '#',
            [] => '.',
            [i] => char::from_digit(*i as u32, 10).unwrap_or('?'),
            _ => '*',
        };
        let pebble = match row.pebbles[v] {
            _ if v == bh => '#',
            0 => '.',
            1 => 'o',
            k => char::from_digit(k as u32, 10).unwrap_or('+'),
        };
        let note = row.notes[v].unwrap_or(if v == bh { '#' } else { ' ' });
        out.push(pebble);
        out.push(agent);
        out.push(note);
        out.push(edge_glyph(row.missing, v));
    }
    out.truncate(out.trim_end().len());
    out.push('\n');
}

/// The text diagram split into pages of at most `page_rows` rounds.
pub fn render_text_pages(trace: &Trace, page_rows: usize) -> Vec<String> {
    let h = &trace.header;
    let (rows, notes) = collect(trace);
    let page_rows = page_rows.max(1);
    let pages = rows.len().div_ceil(page_rows).max(1);
    let mut head = String::new();
    writeln!(
        head,
        "n={} bh={} starts={:?} protocol={} adversary={} rounds={}",
        h.n,
        h.bh_index,
        h.starts,
        h.protocol,
        h.adversary,
        rows.len()
    )
    .unwrap();
    let mut axis = String::from(" round  ");
    for v in 0..h.n {
        write!(axis, "{v:>3} ").unwrap();
    }
    axis.truncate(axis.trim_end().len());
    let mut out = Vec::with_capacity(pages);
    for p in 0..pages {
        let mut s = head.clone();
        if pages > 1 {
            writeln!(s, "page {}/{}", p + 1, pages).unwrap();
        }
        s.push_str(&axis);
        s.push('\n');
        let chunk = rows.iter().skip(p * page_rows).take(page_rows);
        let mut last = 0;
        for row in chunk {
            render_row(&mut s, row, h.n, h.bh_index);
            last = row.round;
        }
        let first = (p * page_rows) as u64;
        for a in notes.iter().filter(|a| a.round >= first && a.round <= last) {
            writeln!(s, "  round {}: {}", a.round, a.text).unwrap();
        }
        out.push(s);
    }
    out
}

pub fn render_text(trace: &Trace) -> String {
    render_text_pages(trace, DEFAULT_PAGE_ROWS).join("\n")
}

const COLORS: [&str; AGENT_COUNT] = ["#1f77b4", "#d62728", "#2ca02c"];

/// An SVG drawing of the whole trace. Agent paths are polylines broken where
/// they wrap around the ring.
pub fn render_svg(trace: &Trace) -> String {
    let h = &trace.header;
    let (rows, notes) = collect(trace);
    let (dx, dy, margin) = (24.0, 6.0, 40.0);
    let x = |v: usize| margin + dx * v as f64 + dx / 2.0;
    let y = |r: f64| margin + dy * r;
    let width = margin * 2.0 + dx * h.n as f64;
    let height = margin * 2.0 + dy * (rows.len() as f64 + 1.0);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="monospace" font-size="10">"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{dx}" height="{}" fill="black"/>"#,
        margin + dx * h.bh_index as f64,
        y(0.0),
        dy * (rows.len() as f64 + 1.0)
    )
    .unwrap();
    for v in 0..h.n {
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{v}</text>"#,
            x(v),
            margin - 8.0
        )
        .unwrap();
    }
    for row in &rows {
        let ry = y(row.round as f64 + 1.0);
        if let Some(e) = row.missing {
            let gx = if e == h.n - 1 {
                margin
            } else {
                margin + dx * (e + 1) as f64
            };
            writeln!(
                s,
                r#"<line x1="{gx}" y1="{}" x2="{gx}" y2="{}" stroke="orange" stroke-width="3"/>"#,
                ry - dy / 2.0,
                ry + dy / 2.0
            )
            .unwrap();
        }
        for (v, &k) in row.pebbles.iter().enumerate() {
            if k > 0 {
                writeln!(
                    s,
                    r#"<circle cx="{}" cy="{ry}" r="2" fill="gray"/>"#,
                    x(v) - 6.0
                )
                .unwrap();
            }
        }
    }
    for (i, color) in COLORS.iter().enumerate() {
        let mut pts = vec![(h.starts[i], 0.0)];
        let mut segments = Vec::new();
        for row in rows.iter().filter(|r| r.alive[i]) {
            let p = row.position[i];
            let last = pts.last().expect("non-empty").0;
            if last.abs_diff(p) > 1 {
                segments.push(std::mem::take(&mut pts));
            }
            pts.push((p, row.round as f64 + 1.0));
        }
        segments.push(pts);
        for seg in segments.iter().filter(|s| !s.is_empty()) {
            let path: Vec<String> = seg
                .iter()
                .map(|&(v, r)| format!("{},{}", x(v), y(r)))
                .collect();
            writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                path.join(" "),
                color
            )
            .unwrap();
        }
    }
    for a in &notes {
        writeln!(
            s,
            r#"<text x="{}" y="{}" fill="purple">r{}: {}</text>"#,
            margin,
            y(a.round as f64 + 1.0),
            a.round,
            xml_escape(&a.text)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
