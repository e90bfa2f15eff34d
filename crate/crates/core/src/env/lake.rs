//! FrozenLake grids with costly position queries.
//!
//! Cells are indexed row-major (`row * n + col`); actions follow the usual
//! order `left, down, right, up`. Moves off the grid clamp to the border.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acno::{self, AcnoEnv, ControlAction, EnvSpec, MeasureAction, StateId, StepOutcome, DEFAULT_STEP_CAP};

/// Rejection-sampling budget of [`generate_lake`].
pub const MAX_MAP_ATTEMPTS: usize = 10_000;

pub const LEFT: ControlAction = ControlAction(0);
pub const DOWN: ControlAction = ControlAction(1);
pub const RIGHT: ControlAction = ControlAction(2);
pub const UP: ControlAction = ControlAction(3);

/// The 4x4 benchmark layout.
pub const STANDARD_4X4: [&str; 4] = ["SFFF", "FHFH", "FFFH", "HFFG"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Start,
    Frozen,
    Hole,
    Goal,
}

impl Cell {
    fn symbol(self) -> char {
        match self {
            Cell::Start => 'S',
            Cell::Frozen => 'F',
            Cell::Hole => 'H',
            Cell::Goal => 'G',
        }
    }

    fn is_terminal(self) -> bool {
        matches!(self, Cell::Hole | Cell::Goal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LakeVariant {
    /// Moves go exactly where intended.
    Deterministic,
    /// Intended direction w.p. 1/2, otherwise two cells in that direction.
    SemiSlippery,
    /// Intended or either perpendicular direction, each w.p. 1/3.
    Slippery,
}

impl FromStr for LakeVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "det" | "deterministic" => Ok(LakeVariant::Deterministic),
            "semi" | "semi-slippery" => Ok(LakeVariant::SemiSlippery),
            "slip" | "slippery" => Ok(LakeVariant::Slippery),
            other => Err(format!("unknown lake variant `{other}` (expected det, semi or slip)")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LakeError {
    #[error("lake map must be square with side >= 4, got {rows}x{cols}")]
    Shape { rows: usize, cols: usize },
    #[error("unknown map character `{0}`")]
    Symbol(char),
    #[error("map must contain exactly one start cell, found {0}")]
    StartCount(usize),
    #[error("map has no goal cell")]
    NoGoal,
    #[error("no hole-free path from start to goal")]
    Unreachable,
    #[error("hole density must lie in [0, 1), got {0}")]
    Density(f64),
    #[error("gave up after {0} attempts to generate a solvable map")]
    TooDense(usize),
}

/// Grid layout: square, one start, at least one goal, solvable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LakeMap {
    size: usize,
    cells: Vec<Cell>,
}

impl LakeMap {
    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self, LakeError> {
        let size = rows.len();
        let mut cells = Vec::with_capacity(size * size);
        for row in rows {
            let row = row.as_ref().trim();
            if row.chars().count() != size {
                return Err(LakeError::Shape { rows: size, cols: row.chars().count() });
            }
            for ch in row.chars() {
                cells.push(match ch {
                    'S' => Cell::Start,
                    'F' => Cell::Frozen,
                    'H' => Cell::Hole,
                    'G' => Cell::Goal,
                    other => return Err(LakeError::Symbol(other)),
                });
            }
        }
        let map = Self { size, cells };
        map.validate()?;
        Ok(map)
    }

    pub fn standard_4x4() -> Self {
        Self::from_rows(&STANDARD_4X4).expect("benchmark map is valid")
    }

    fn validate(&self) -> Result<(), LakeError> {
        if self.size < 4 {
            return Err(LakeError::Shape { rows: self.size, cols: self.size });
        }
        let starts = self.cells.iter().filter(|&&c| c == Cell::Start).count();
        if starts != 1 {
            return Err(LakeError::StartCount(starts));
        }
        if !self.cells.contains(&Cell::Goal) {
            return Err(LakeError::NoGoal);
        }
        if !self.goal_reachable() {
            return Err(LakeError::Unreachable);
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.size + col]
    }

    pub fn cell_at(&self, s: StateId) -> Cell {
        self.cells[s.0]
    }

    pub fn start(&self) -> StateId {
        StateId(self.cells.iter().position(|&c| c == Cell::Start).expect("validated"))
    }

    pub fn coords(&self, s: StateId) -> (usize, usize) {
        (s.0 / self.size, s.0 % self.size)
    }

    pub fn index(&self, row: usize, col: usize) -> StateId {
        StateId(row * self.size + col)
    }

    /// Breadth-first search over non-hole cells.
    pub fn goal_reachable(&self) -> bool {
        let Some(start) = self.cells.iter().position(|&c| c == Cell::Start) else {
            return false;
        };
        let n = self.size;
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            if self.cells[i] == Cell::Goal {
                return true;
            }
            let (r, c) = (i / n, i % n);
            let neighbours = [
                (r > 0).then(|| i - n),
                (r + 1 < n).then(|| i + n),
                (c > 0).then(|| i - 1),
                (c + 1 < n).then(|| i + 1),
            ];
            for j in neighbours.into_iter().flatten() {
                if !seen[j] && self.cells[j] != Cell::Hole {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        false
    }

    /// One cell in `dir`, clamped at the border.
    fn shift(&self, s: usize, dir: usize) -> usize {
        let n = self.size;
        let (r, c) = (s / n, s % n);
        match dir {
            0 => r * n + c.saturating_sub(1),
            1 => (r + 1).min(n - 1) * n + c,
            2 => r * n + (c + 1).min(n - 1),
            _ => r.saturating_sub(1) * n + c,
        }
    }
}

impl fmt::Display for LakeMap {
    /// Map-file format: one row per line, `S`/`F`/`H`/`G`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.cells.chunks(self.size) {
            let line: String = row.iter().map(|c| c.symbol()).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl FromStr for LakeMap {
    type Err = LakeError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        Self::from_rows(&rows)
    }
}

/// Random `n x n` map: independent holes at `hole_density`, start top-left,
/// goal bottom-right, resampled until solvable.
pub fn generate_lake(n: usize, hole_density: f64, seed: u64) -> Result<LakeMap, LakeError> {
    if n < 4 {
        return Err(LakeError::Shape { rows: n, cols: n });
    }
    if !(0.0..1.0).contains(&hole_density) {
        return Err(LakeError::Density(hole_density));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(acno::mix_seed(seed, n as u64) ^ hole_density.to_bits());
    for _ in 0..MAX_MAP_ATTEMPTS {
        let mut cells: Vec<Cell> = (0..n * n)
            .map(|_| if rng.random::<f64>() < hole_density { Cell::Hole } else { Cell::Frozen })
            .collect();
        cells[0] = Cell::Start;
        cells[n * n - 1] = Cell::Goal;
        let map = LakeMap { size: n, cells };
        if map.goal_reachable() {
            return Ok(map);
        }
    }
    Err(LakeError::TooDense(MAX_MAP_ATTEMPTS))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LakeSpec {
    pub map: LakeMap,
    pub variant: LakeVariant,
    pub cost: f64,
    pub discount: f64,
    pub step_cap: usize,
}

impl LakeSpec {
    pub fn new(map: LakeMap, variant: LakeVariant, cost: f64) -> Self {
        Self { map, variant, cost, discount: 0.95, step_cap: DEFAULT_STEP_CAP }
    }

    pub fn standard(variant: LakeVariant, cost: f64) -> Self {
        Self::new(LakeMap::standard_4x4(), variant, cost)
    }
}

/// Sequence of unit moves a control action resolves to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub direction: usize,
    pub cells: usize,
}

/// Draw how the variant perturbs the intended direction.
pub fn sample_move<R: Rng + ?Sized>(variant: LakeVariant, intended: ControlAction, rng: &mut R) -> Move {
    let dir = intended.0;
    match variant {
        LakeVariant::Deterministic => Move { direction: dir, cells: 1 },
        LakeVariant::SemiSlippery => Move { direction: dir, cells: if rng.random::<f64>() < 0.5 { 1 } else { 2 } },
        LakeVariant::Slippery => {
            let offset = rng.random_range(0..3usize);
            Move { direction: (dir + 3 + offset) % 4, cells: 1 }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LakeEnv {
    spec: LakeSpec,
    state: usize,
    done: bool,
    steps: usize,
    reward_sum: f64,
    rng: ChaCha8Rng,
}

impl LakeEnv {
    pub fn new(spec: LakeSpec) -> Self {
        let state = spec.map.start().0;
        Self { spec, state, done: false, steps: 0, reward_sum: 0.0, rng: acno::stream_rng(0, 0) }
    }

    pub fn lake(&self) -> &LakeSpec {
        &self.spec
    }

    /// Resolve `mv` from `from` cell by cell: a hole or goal (or a wall) hit
    /// on an earlier cell stops the move there.
    pub fn apply_move(map: &LakeMap, from: StateId, mv: Move) -> StateId {
        let mut s = from.0;
        for _ in 0..mv.cells {
            let next = map.shift(s, mv.direction);
            if next == s {
                break;
            }
            s = next;
            if map.cells[s].is_terminal() {
                break;
            }
        }
        StateId(s)
    }

    /// Exact `P(s' | s, a)` for oracles. Terminal cells are absorbing.
    pub fn kernel(&self) -> Vec<Vec<Vec<f64>>> {
        let map = &self.spec.map;
        let n = map.num_cells();
        let moves = |a: usize| -> Vec<(Move, f64)> {
            match self.spec.variant {
                LakeVariant::Deterministic => vec![(Move { direction: a, cells: 1 }, 1.0)],
                LakeVariant::SemiSlippery => {
                    vec![(Move { direction: a, cells: 1 }, 0.5), (Move { direction: a, cells: 2 }, 0.5)]
                }
                LakeVariant::Slippery => (0..3)
                    .map(|o| (Move { direction: (a + 3 + o) % 4, cells: 1 }, 1.0 / 3.0))
                    .collect(),
            }
        };
        (0..n)
            .map(|s| {
                (0..4)
                    .map(|a| {
                        let mut row = vec![0.0; n];
                        if map.cells[s].is_terminal() {
                            row[s] = 1.0;
                        } else {
                            for (mv, p) in moves(a) {
                                row[Self::apply_move(map, StateId(s), mv).0] += p;
                            }
                        }
                        row
                    })
                    .collect()
            })
            .collect()
    }
}

impl AcnoEnv for LakeEnv {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            num_states: self.spec.map.num_cells(),
            num_actions: 4,
            measurement_cost: self.spec.cost,
            discount: self.spec.discount,
            initial_state: self.spec.map.start(),
        }
    }

    fn reset(&mut self, seed: u64) -> StateId {
        self.rng = acno::stream_rng(seed, 0);
        self.state = self.spec.map.start().0;
        self.done = false;
        self.steps = 0;
        self.reward_sum = 0.0;
        StateId(self.state)
    }

    fn step(&mut self, action: ControlAction, measure: MeasureAction) -> Result<StepOutcome, acno::AcnoError> {
        acno::check_action(&self.spec(), action, self.done)?;
        let mv = sample_move(self.spec.variant, action, &mut self.rng);
        let next = Self::apply_move(&self.spec.map, StateId(self.state), mv);
        self.state = next.0;
        self.steps += 1;
        let cell = self.spec.map.cells[self.state];
        let reward = if cell == Cell::Goal { 1.0 } else { 0.0 };
        self.done = cell.is_terminal() || self.steps >= self.spec.step_cap;
        self.reward_sum += reward;
        Ok(acno::outcome(reward, self.spec.cost, measure, next, self.done))
    }

    fn episode_reward(&self) -> f64 {
        self.reward_sum
    }

    fn steps_taken(&self) -> usize {
        self.steps
    }
}
