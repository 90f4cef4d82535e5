//! Minimal MiniGrid-style rooms: a square grid with border walls, an agent
//! with a heading, and a goal tile.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Environment, Step};
use crate::error::{self, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Empty,
    Wall,
    Goal,
}

pub const TURN_LEFT: usize = 0;
pub const TURN_RIGHT: usize = 1;
pub const FORWARD: usize = 2;

/// Egocentric view: `VIEW_DEPTH` rows ahead (the agent's own row first) by
/// three columns (left, centre, right).
const VIEW_DEPTH: usize = 3;
const VIEW_WIDTH: usize = 3;

/// Normalized position (2) + heading one-hot (4) + wall and goal channels of
/// the egocentric view.
pub const GRID_OBS_DIM: usize = 2 + 4 + 2 * VIEW_DEPTH * VIEW_WIDTH;

/// Headings: 0 = +x (right), 1 = +y (down), 2 = -x (left), 3 = -y (up).
const DIRS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Empty,
    Crossing,
}

#[derive(Debug, Clone)]
pub struct GridWorld {
    side: usize,
    layout: Layout,
    cells: Vec<Cell>,
    pos: (usize, usize),
    dir: usize,
    steps: usize,
    max_steps: usize,
    done: bool,
    /// Success reward `1 - 0.9 * steps / max_steps` when set, else flat 1.
    pub shaped_reward: bool,
    rng: ChaCha8Rng,
}

impl GridWorld {
    /// Empty room; agent at the top-left interior cell facing right, goal in
    /// the bottom-right interior cell.
    pub fn empty(side: usize, seed: u64) -> Result<Self> {
        if side < 4 {
            return error::config(format!("grid side {side} leaves no room between start and goal"));
        }
        let mut g = Self::blank(side, Layout::Empty, seed);
        g.reset();
        Ok(g)
    }

    /// 9x9 room split by one full-length wall (vertical or horizontal, at an
    /// even interior offset) with a single-cell gap; layout redrawn per episode.
    pub fn simple_crossing(seed: u64) -> Self {
        let mut g = Self::blank(9, Layout::Crossing, seed);
        g.reset();
        g
    }

    fn blank(side: usize, layout: Layout, seed: u64) -> Self {
        Self {
            side,
            layout,
            cells: vec![Cell::Empty; side * side],
            pos: (1, 1),
            dir: 0,
            steps: 0,
            max_steps: 4 * side * side,
            done: true,
            shaped_reward: true,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    pub fn cell(&self, x: usize, y: usize) -> Cell {
        self.cells[y * self.side + x]
    }

    pub fn set_cell(&mut self, x: usize, y: usize, cell: Cell) {
        self.cells[y * self.side + x] = cell;
    }

    pub fn agent(&self) -> ((usize, usize), usize) {
        (self.pos, self.dir)
    }

    /// Moves the agent without touching the step counter.
    pub fn place_agent(&mut self, pos: (usize, usize), dir: usize) {
        self.pos = pos;
        self.dir = dir % 4;
    }

    fn build_layout(&mut self) {
        let n = self.side;
        self.cells.iter_mut().for_each(|c| *c = Cell::Empty);
        for i in 0..n {
            self.cells[i] = Cell::Wall;
            self.cells[(n - 1) * n + i] = Cell::Wall;
            self.cells[i * n] = Cell::Wall;
            self.cells[i * n + n - 1] = Cell::Wall;
        }
        if self.layout == Layout::Crossing {
            // wall line at an even interior offset so start and goal stay free
            let offsets: Vec<usize> = (2..n - 2).step_by(2).collect();
            let at = offsets[self.rng.random_range(0..offsets.len())];
            let gap = self.rng.random_range(1..n - 1);
            let vertical = self.rng.random_bool(0.5);
            for i in 1..n - 1 {
                if i == gap {
                    continue;
                }
                let (x, y) = if vertical { (at, i) } else { (i, at) };
                self.cells[y * n + x] = Cell::Wall;
            }
        }
        self.cells[(n - 2) * n + (n - 2)] = Cell::Goal;
    }

    fn lookup(&self, x: i64, y: i64) -> Cell {
        if x < 0 || y < 0 || x >= self.side as i64 || y >= self.side as i64 {
            Cell::Wall
        } else {
            self.cell(x as usize, y as usize)
        }
    }

    pub fn observe(&self) -> Vec<f64> {
        let scale = (self.side - 1) as f64;
        let mut obs = Vec::with_capacity(GRID_OBS_DIM);
        obs.push(self.pos.0 as f64 / scale);
        obs.push(self.pos.1 as f64 / scale);
        obs.extend((0..4).map(|d| if d == self.dir { 1.0 } else { 0.0 }));
        let (fx, fy) = DIRS[self.dir];
        // right-hand side of the heading
        let (rx, ry) = DIRS[(self.dir + 1) % 4];
        let mut walls = Vec::with_capacity(VIEW_DEPTH * VIEW_WIDTH);
        let mut goals = Vec::with_capacity(VIEW_DEPTH * VIEW_WIDTH);
        for ahead in 0..VIEW_DEPTH as i64 {
            for lateral in -1..=1i64 {
                let x = self.pos.0 as i64 + ahead * fx + lateral * rx;
                let y = self.pos.1 as i64 + ahead * fy + lateral * ry;
                let c = self.lookup(x, y);
                walls.push(if c == Cell::Wall { 1.0 } else { 0.0 });
                goals.push(if c == Cell::Goal { 1.0 } else { 0.0 });
            }
        }
        obs.extend(walls);
        obs.extend(goals);
        obs
    }
}

impl Environment for GridWorld {
    fn n_actions(&self) -> usize {
        3
    }

    fn obs_dim(&self) -> usize {
        GRID_OBS_DIM
    }

    fn reset(&mut self) -> Vec<f64> {
        self.build_layout();
        self.pos = (1, 1);
        self.dir = 0;
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if self.done {
            return Err(Error::Usage("grid episode is over; call reset".into()));
        }
        self.steps += 1;
        let mut reward = 0.0;
        let mut reached = false;
        match action {
            TURN_LEFT => self.dir = (self.dir + 3) % 4,
            TURN_RIGHT => self.dir = (self.dir + 1) % 4,
            FORWARD => {
                let (dx, dy) = DIRS[self.dir];
                let (x, y) = (self.pos.0 as i64 + dx, self.pos.1 as i64 + dy);
                match self.lookup(x, y) {
                    Cell::Wall => {}
                    Cell::Empty => self.pos = (x as usize, y as usize),
                    Cell::Goal => {
                        self.pos = (x as usize, y as usize);
                        reached = true;
                        reward = if self.shaped_reward {
                            1.0 - 0.9 * self.steps as f64 / self.max_steps as f64
                        } else {
                            1.0
                        };
                    }
                }
            }
            _ => return Err(Error::Index(format!("grid action {action} not in {{0, 1, 2}}"))),
        }
        let capped = !reached && self.steps >= self.max_steps;
        self.done = reached || capped;
        Ok(Step { obs: self.observe(), reward, done: self.done, truncated: capped })
    }
}
