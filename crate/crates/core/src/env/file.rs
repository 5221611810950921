//! Text format for layouts.
//!
//! ```text
//! grid 3 4
//! ....
//! .#S.
//! ....
//! route: (0,0) (0,1) (0,2)
//! ```
//!
//! `.` is open, `#` a wall and `S` the single start cell. Each `route:` line
//! adds a route; the first one is route 0. Blank lines are ignored.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::{Cell, EnvError, GridLayout, RewardRoute};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutParseError {
    #[error("missing `grid <height> <width>` header")]
    MissingHeader,
    #[error("line {line}: malformed header, expected `grid <height> <width>`")]
    BadHeader { line: usize },
    #[error("line {line}: row has {got} cells, expected {expected}")]
    RowLength {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: unexpected character {ch:?} in grid row")]
    BadCell { line: usize, ch: char },
    #[error("grid declares {expected} rows but only {got} were found")]
    MissingRows { expected: usize, got: usize },
    #[error("expected exactly one start cell `S`, found {0}")]
    StartCount(usize),
    #[error("line {line}: malformed route: {reason}")]
    RouteSyntax { line: usize, reason: String },
    #[error("line {line}: unexpected content after grid: {content:?}")]
    TrailingGarbage { line: usize, content: String },
    #[error("line {line}: {source}")]
    InvalidRoute { line: usize, source: EnvError },
    #[error("{0}")]
    Invalid(EnvError),
}

pub fn load_layout(name: &str, source: &str) -> Result<GridLayout, LayoutParseError> {
    let mut lines = source
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.trim().is_empty());

    let (header_line, header) = lines.next().ok_or(LayoutParseError::MissingHeader)?;
    let (height, width) = parse_header(header).ok_or(LayoutParseError::BadHeader {
        line: header_line,
    })?;

    let mut walls = BTreeSet::new();
    let mut starts = Vec::new();
    for row in 0..height {
        let (line, text) = lines.next().ok_or(LayoutParseError::MissingRows {
            expected: height,
            got: row,
        })?;
        let text = text.trim_start();
        let got = text.chars().count();
        if got != width {
            return Err(LayoutParseError::RowLength {
                line,
                expected: width,
                got,
            });
        }
        for (col, ch) in text.chars().enumerate() {
            match ch {
                '.' => {}
                '#' => {
                    walls.insert(Cell::new(row, col));
                }
                'S' => starts.push(Cell::new(row, col)),
                _ => return Err(LayoutParseError::BadCell { line, ch }),
            }
        }
    }
    let start = match starts.as_slice() {
        [s] => *s,
        other => return Err(LayoutParseError::StartCount(other.len())),
    };

    let mut routes = Vec::new();
    let mut route_lines = Vec::new();
    for (line, text) in lines {
        let text = text.trim();
        let Some(rest) = text.strip_prefix("route:") else {
            return Err(LayoutParseError::TrailingGarbage {
                line,
                content: text.to_string(),
            });
        };
        let cells = parse_cells(rest)
            .map_err(|reason| LayoutParseError::RouteSyntax { line, reason })?;
        let route = RewardRoute::new(cells)
            .map_err(|source| LayoutParseError::InvalidRoute { line, source })?;
        routes.push(route);
        route_lines.push(line);
    }

    GridLayout::new(name, height, width, walls, start, routes).map_err(|err| {
        match route_index(&err).and_then(|i| route_lines.get(i)) {
            Some(&line) => LayoutParseError::InvalidRoute { line, source: err },
            None => LayoutParseError::Invalid(err),
        }
    })
}

fn route_index(err: &EnvError) -> Option<usize> {
    match *err {
        EnvError::RouteTooShort { route, .. }
        | EnvError::RouteCellBlocked { route, .. }
        | EnvError::RouteNotContiguous { route, .. }
        | EnvError::RouteStartsOnAgent { route, .. }
        | EnvError::RouteLengthMismatch { route, .. } => Some(route),
        _ => None,
    }
}

fn parse_header(text: &str) -> Option<(usize, usize)> {
    let mut parts = text.split_whitespace();
    if parts.next()? != "grid" {
        return None;
    }
    let height = parts.next()?.parse().ok()?;
    let width = parts.next()?.parse().ok()?;
    if parts.next().is_some() || height == 0 || width == 0 {
        return None;
    }
    Some((height, width))
}

/// Parses `(r,c) (r,c) ...`, tolerating whitespace inside the parentheses.
fn parse_cells(text: &str) -> Result<Vec<Cell>, String> {
    let mut cells = Vec::new();
    let mut rest = text.trim_start();
    while !rest.is_empty() {
        let body = rest
            .strip_prefix('(')
            .ok_or_else(|| format!("expected `(` at {rest:?}"))?;
        let close = body
            .find(')')
            .ok_or_else(|| "unclosed `(`".to_string())?;
        let (r, c) = body[..close]
            .split_once(',')
            .ok_or_else(|| format!("expected `row,col` in {:?}", &body[..close]))?;
        let row = r
            .trim()
            .parse()
            .map_err(|_| format!("bad row index {:?}", r.trim()))?;
        let col = c
            .trim()
            .parse()
            .map_err(|_| format!("bad column index {:?}", c.trim()))?;
        cells.push(Cell::new(row, col));
        rest = body[close + 1..].trim_start();
    }
    Ok(cells)
}

/// Canonical text form; `load_layout` accepts it back unchanged.
pub fn serialize_layout(layout: &GridLayout) -> String {
    let mut out = format!("grid {} {}\n", layout.height(), layout.width());
    for row in 0..layout.height() {
        for col in 0..layout.width() {
            let cell = Cell::new(row, col);
            out.push(if cell == layout.start() {
                'S'
            } else if layout.walls().contains(&cell) {
                '#'
            } else {
                '.'
            });
        }
        out.push('\n');
    }
    for route in layout.routes() {
        out.push_str("route:");
        for cell in route.cells() {
            let _ = write!(out, " {cell}");
        }
        out.push('\n');
    }
    out
}
