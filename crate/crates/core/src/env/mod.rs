//! Deterministic, strictly episodic Gridworld with a moving target.
//!
//! The target walks along a [`RewardRoute`] one cell per agent step. An
//! episode lasts exactly `T = route.len() - 1` steps unless the agent lands on
//! the target cell, in which case it is rewarded and the episode stops.

mod enumerate;
mod file;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub use enumerate::{enumerate_rewarded, DEFAULT_ENUMERATION_CAP};
pub use file::{load_layout, serialize_layout, LayoutParseError};

/// Number of actions available in every state.
pub const NUM_ACTIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    fn manhattan(self, other: Cell) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// The five moves. The declaration order is the canonical enumeration and
/// serialization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    DoNothing,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::DoNothing,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
            Action::DoNothing => "nothing",
        }
    }

    pub fn from_name(name: &str) -> Option<Action> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    /// Row/column offset; row 0 is the top row, so `Up` decrements the row.
    fn offset(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
            Action::DoNothing => (0, 0),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("cell {0} is outside the {1}x{2} grid")]
    OutOfBounds(Cell, usize, usize),
    #[error("cell {0} is a wall")]
    Wall(Cell),
    #[error("start cell {0} is not an open cell")]
    InvalidStart(Cell),
    #[error("layout has no reward route")]
    NoRoutes,
    #[error("route {route} has {len} cells, at least 2 are required")]
    RouteTooShort { route: usize, len: usize },
    #[error("route {route} cell {cell} at step {step} is not an open cell")]
    RouteCellBlocked { route: usize, step: usize, cell: Cell },
    #[error("route {route} jumps from {from} to {to} at step {step}")]
    RouteNotContiguous {
        route: usize,
        step: usize,
        from: Cell,
        to: Cell,
    },
    #[error("route {route} starts on the agent start cell {cell}")]
    RouteStartsOnAgent { route: usize, cell: Cell },
    #[error("route {route} has episode length {len}, route 0 has {expected}")]
    RouteLengthMismatch {
        route: usize,
        len: usize,
        expected: usize,
    },
    #[error("episode needs {expected} actions, got {got}")]
    ActionCountMismatch { expected: usize, got: usize },
    #[error("route index {0} does not exist")]
    UnknownRoute(usize),
    #[error("5^{horizon} action sequences exceed the enumeration cap of {cap}")]
    BudgetExceeded { horizon: usize, cap: usize },
}

/// Target positions over time; `cells[t]` is the target at step `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewardRoute {
    cells: Vec<Cell>,
}

impl RewardRoute {
    /// Checks the length and contiguity invariants. Geometry checks against a
    /// particular grid happen in [`GridLayout::new`].
    pub fn new(cells: Vec<Cell>) -> Result<Self, EnvError> {
        Self::validate(&cells, 0)?;
        Ok(Self { cells })
    }

    fn validate(cells: &[Cell], route: usize) -> Result<(), EnvError> {
        if cells.len() < 2 {
            return Err(EnvError::RouteTooShort {
                route,
                len: cells.len(),
            });
        }
        for (step, pair) in cells.windows(2).enumerate() {
            if pair[0].manhattan(pair[1]) > 1 {
                return Err(EnvError::RouteNotContiguous {
                    route,
                    step: step + 1,
                    from: pair[0],
                    to: pair[1],
                });
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Number of agent steps per episode.
    pub fn episode_len(&self) -> usize {
        self.cells.len() - 1
    }

    pub fn target_at(&self, step: usize) -> Cell {
        self.cells[step]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridLayout {
    name: String,
    height: usize,
    width: usize,
    walls: BTreeSet<Cell>,
    start: Cell,
    routes: Vec<RewardRoute>,
}

impl GridLayout {
    pub fn new(
        name: impl Into<String>,
        height: usize,
        width: usize,
        walls: BTreeSet<Cell>,
        start: Cell,
        routes: Vec<RewardRoute>,
    ) -> Result<Self, EnvError> {
        let layout = Self {
            name: name.into(),
            height,
            width,
            walls,
            start,
            routes,
        };
        layout.validate()?;
        Ok(layout)
    }

    fn validate(&self) -> Result<(), EnvError> {
        if self.check_open(self.start).is_err() {
            return Err(EnvError::InvalidStart(self.start));
        }
        let first = self.routes.first().ok_or(EnvError::NoRoutes)?;
        for (index, route) in self.routes.iter().enumerate() {
            RewardRoute::validate(&route.cells, index)?;
            for (step, &cell) in route.cells.iter().enumerate() {
                if self.check_open(cell).is_err() {
                    return Err(EnvError::RouteCellBlocked {
                        route: index,
                        step,
                        cell,
                    });
                }
            }
            if route.cells[0] == self.start {
                return Err(EnvError::RouteStartsOnAgent {
                    route: index,
                    cell: self.start,
                });
            }
            if route.episode_len() != first.episode_len() {
                return Err(EnvError::RouteLengthMismatch {
                    route: index,
                    len: route.episode_len(),
                    expected: first.episode_len(),
                });
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn walls(&self) -> &BTreeSet<Cell> {
        &self.walls
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn routes(&self) -> &[RewardRoute] {
        &self.routes
    }

    pub fn route(&self, index: usize) -> Result<&RewardRoute, EnvError> {
        self.routes.get(index).ok_or(EnvError::UnknownRoute(index))
    }

    /// Episode length shared by every route.
    pub fn episode_len(&self) -> usize {
        self.routes[0].episode_len()
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    pub fn is_open(&self, cell: Cell) -> bool {
        self.contains(cell) && !self.walls.contains(&cell)
    }

    fn check_open(&self, cell: Cell) -> Result<(), EnvError> {
        if !self.contains(cell) {
            Err(EnvError::OutOfBounds(cell, self.height, self.width))
        } else if self.walls.contains(&cell) {
            Err(EnvError::Wall(cell))
        } else {
            Ok(())
        }
    }

    /// Deterministic successor of `pos` under `action`.
    pub fn step(&self, pos: Cell, action: Action) -> Result<Cell, EnvError> {
        self.check_open(pos)?;
        Ok(self.step_unchecked(pos, action))
    }

    /// Successor for a position already known to be open. Blocked moves keep
    /// the agent in place.
    pub(crate) fn step_unchecked(&self, pos: Cell, action: Action) -> Cell {
        let (dr, dc) = action.offset();
        let (Some(row), Some(col)) = (
            pos.row.checked_add_signed(dr),
            pos.col.checked_add_signed(dc),
        ) else {
            return pos;
        };
        let next = Cell::new(row, col);
        if self.is_open(next) {
            next
        } else {
            pos
        }
    }
}

/// Record of one episode. `percepts` stops at the reward step when rewarded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub actions: Vec<Action>,
    pub percepts: Vec<Cell>,
    pub reward_step: Option<usize>,
}

impl Trajectory {
    pub fn rewarded(&self) -> bool {
        self.reward_step.is_some()
    }

    /// Actions that were actually executed before the episode ended.
    pub fn executed_actions(&self) -> &[Action] {
        &self.actions[..self.percepts.len() - 1]
    }
}

/// Plays `actions` against `route`, stopping at the first co-location.
pub fn run_episode(
    layout: &GridLayout,
    route: &RewardRoute,
    actions: &[Action],
) -> Result<Trajectory, EnvError> {
    let horizon = route.episode_len();
    if actions.len() != horizon {
        return Err(EnvError::ActionCountMismatch {
            expected: horizon,
            got: actions.len(),
        });
    }
    let mut pos = layout.start();
    let mut percepts = Vec::with_capacity(horizon + 1);
    percepts.push(pos);
    let mut reward_step = None;
    for (t, &action) in (1..=horizon).zip(actions) {
        pos = layout.step_unchecked(pos, action);
        percepts.push(pos);
        if pos == route.target_at(t) {
            reward_step = Some(t);
            break;
        }
    }
    Ok(Trajectory {
        actions: actions.to_vec(),
        percepts,
        reward_step,
    })
}
