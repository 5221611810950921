//! Line-oriented ECM checkpoints.
//!
//! ```text
//! ecm v1
//! h <row> <col> <action> <h> <g>
//! map <row> <col> <action> <next_row> <next_col>
//! ```
//!
//! Edges print in canonical (cell, action) order and floats use the shortest
//! representation that parses back to the same bits.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::Ecm;
use crate::env::{Action, Cell};

const MAGIC: &str = "ecm v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnapshotError {
    #[error("missing `{MAGIC}` header")]
    MissingHeader,
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: duplicate entry")]
    Duplicate { line: usize },
}

pub fn write_snapshot(ecm: &Ecm) -> String {
    let mut out = format!("{MAGIC}\n");
    let edges: BTreeSet<(Cell, Action)> = ecm
        .h
        .keys()
        .chain(ecm.glow.keys())
        .copied()
        .collect();
    for (s, a) in edges {
        let _ = writeln!(
            out,
            "h {} {} {} {} {}",
            s.row,
            s.col,
            a.name(),
            ecm.h(s, a),
            ecm.glow(s, a)
        );
    }
    for (s, a, n) in ecm.map_entries() {
        let _ = writeln!(out, "map {} {} {} {} {}", s.row, s.col, a.name(), n.row, n.col);
    }
    out
}

pub fn parse_snapshot(text: &str) -> Result<Ecm, SnapshotError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => return Err(SnapshotError::MissingHeader),
    }
    let mut ecm = Ecm::new();
    for (line, text) in lines {
        if text.is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        let syntax = |reason: &str| SnapshotError::Syntax {
            line,
            reason: reason.to_string(),
        };
        if fields.len() != 6 {
            return Err(syntax("expected 6 fields"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| syntax("bad index"));
        let float = |s: &str| s.parse::<f64>().map_err(|_| syntax("bad number"));
        let cell = Cell::new(int(fields[1])?, int(fields[2])?);
        let action = Action::from_name(fields[3]).ok_or_else(|| syntax("unknown action"))?;
        let key = (cell, action);
        match fields[0] {
            "h" => {
                let (h, g) = (float(fields[4])?, float(fields[5])?);
                if ecm.h.insert(key, h).is_some() {
                    return Err(SnapshotError::Duplicate { line });
                }
                if g != 0.0 {
                    ecm.glow.insert(key, g);
                }
            }
            "map" => {
                let next = Cell::new(int(fields[4])?, int(fields[5])?);
                if ecm.map.insert(key, next).is_some() {
                    return Err(SnapshotError::Duplicate { line });
                }
            }
            _ => return Err(syntax("expected `h` or `map`")),
        }
    }
    Ok(ecm)
}
