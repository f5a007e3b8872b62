//! Maze layouts: depth-first carving followed by seeded removal of a share of
//! the remaining walls.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }

    /// World-space coordinates of the cell center (cells are unit squares).
    pub fn center(self) -> (f64, f64) {
        (self.x as f64 + 0.5, self.y as f64 + 0.5)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

/// Square lattice of `n * n` unit cells. The border is always walled;
/// `walls` holds one flag per interior wall slot.
///
/// Slot numbering: slots `0..n(n-1)` separate `(x, y)` from `(x + 1, y)` at
/// index `y * (n - 1) + x`; slots `n(n-1)..2n(n-1)` separate `(x, y)` from
/// `(x, y + 1)` at index `n(n-1) + y * n + x`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MazeGrid {
    n: usize,
    walls: Vec<bool>,
}

pub fn slot_count(n: usize) -> usize {
    2 * n * n.saturating_sub(1)
}

/// Number of walls a generated grid keeps: `round(f * residual)` where the
/// residual is what remains after carving a spanning tree. Rounds half away
/// from zero.
pub fn retained_wall_count(n: usize, retain_fraction: f64) -> usize {
    let residual = slot_count(n) - (n * n - 1);
    (retain_fraction * residual as f64).round() as usize
}

impl MazeGrid {
    /// Grid with every interior wall present.
    pub fn closed(n: usize) -> Self {
        MazeGrid {
            n,
            walls: vec![true; slot_count(n)],
        }
    }

    /// Grid with no interior walls.
    pub fn open(n: usize) -> Self {
        MazeGrid {
            n,
            walls: vec![false; slot_count(n)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cell_count(&self) -> usize {
        self.n * self.n
    }

    pub fn wall_count(&self) -> usize {
        self.walls.iter().filter(|&&w| w).count()
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.n && c.y < self.n
    }

    pub fn cell_index(&self, c: Cell) -> usize {
        c.y * self.n + c.x
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.n, index / self.n)
    }

    /// Slot id between two 4-adjacent cells, or `None` if they are not adjacent.
    pub fn slot_between(&self, a: Cell, b: Cell) -> Option<usize> {
        if !self.contains(a) || !self.contains(b) {
            return None;
        }
        let (lo, hi) = if (a.y, a.x) <= (b.y, b.x) { (a, b) } else { (b, a) };
        if lo.y == hi.y && lo.x + 1 == hi.x {
            Some(lo.y * (self.n - 1) + lo.x)
        } else if lo.x == hi.x && lo.y + 1 == hi.y {
            Some(self.n * (self.n - 1) + lo.y * self.n + lo.x)
        } else {
            None
        }
    }

    /// The two cells separated by a slot.
    pub fn slot_cells(&self, slot: usize) -> (Cell, Cell) {
        let h = self.n * (self.n - 1);
        if slot < h {
            let (y, x) = (slot / (self.n - 1), slot % (self.n - 1));
            (Cell::new(x, y), Cell::new(x + 1, y))
        } else {
            let s = slot - h;
            let (y, x) = (s / self.n, s % self.n);
            (Cell::new(x, y), Cell::new(x, y + 1))
        }
    }

    pub fn has_slot_wall(&self, slot: usize) -> bool {
        self.walls[slot]
    }

    pub fn set_slot_wall(&mut self, slot: usize, present: bool) {
        self.walls[slot] = present;
    }

    /// Whether movement between adjacent cells `a` and `b` is blocked.
    /// Non-adjacent or out-of-grid pairs count as blocked.
    pub fn blocked(&self, a: Cell, b: Cell) -> bool {
        match self.slot_between(a, b) {
            Some(s) => self.walls[s],
            None => true,
        }
    }

    /// Wall on the east side of cell `(x, y)`, including the border.
    pub fn wall_east(&self, x: usize, y: usize) -> bool {
        x + 1 >= self.n || self.walls[y * (self.n - 1) + x]
    }

    /// Wall on the north (+y) side of cell `(x, y)`, including the border.
    pub fn wall_north(&self, x: usize, y: usize) -> bool {
        y + 1 >= self.n || self.walls[self.n * (self.n - 1) + y * self.n + x]
    }

    /// Whether the unit edge of the lattice between grid points is solid.
    /// `vertical` edges run from `(x, y)` to `(x, y + 1)`; horizontal edges
    /// from `(x, y)` to `(x + 1, y)`. Border edges are solid.
    pub fn edge_solid(&self, vertical: bool, x: i64, y: i64) -> bool {
        let n = self.n as i64;
        if vertical {
            if y < 0 || y >= n {
                return false;
            }
            if x <= 0 || x >= n {
                return x == 0 || x == n;
            }
            self.wall_east((x - 1) as usize, y as usize)
        } else {
            if x < 0 || x >= n {
                return false;
            }
            if y <= 0 || y >= n {
                return y == 0 || y == n;
            }
            self.wall_north(x as usize, (y - 1) as usize)
        }
    }

    pub fn open_neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        self.neighbors(c).filter(move |&nb| !self.blocked(c, nb))
    }

    pub fn neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        let n = self.n;
        [
            (c.x + 1 < n).then(|| Cell::new(c.x + 1, c.y)),
            (c.y + 1 < n).then(|| Cell::new(c.x, c.y + 1)),
            (c.x > 0).then(|| Cell::new(c.x - 1, c.y)),
            (c.y > 0).then(|| Cell::new(c.x, c.y - 1)),
        ]
        .into_iter()
        .flatten()
    }

    /// BFS distances from `from` to every cell; `None` for unreachable cells.
    pub fn distances_from(&self, from: Cell) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.cell_count()];
        let mut queue = VecDeque::new();
        dist[self.cell_index(from)] = Some(0);
        queue.push_back(from);
        while let Some(c) = queue.pop_front() {
            let d = dist[self.cell_index(c)].unwrap_or(0);
            for nb in self.open_neighbors(c) {
                let slot = &mut dist[self.cell_index(nb)];
                if slot.is_none() {
                    *slot = Some(d + 1);
                    queue.push_back(nb);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.distances_from(Cell::new(0, 0)).iter().all(Option::is_some)
    }

    pub fn wall_slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.walls.iter().enumerate().filter(|(_, &w)| w).map(|(i, _)| i)
    }

    /// Text form: first line `n`, then one `x1,y1-x2,y2` line per wall.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for slot in self.wall_slots() {
            let (a, b) = self.slot_cells(slot);
            out.push_str(&format!("{a}-{b}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty maze text".into()))?;
        let n: usize = header
            .parse()
            .map_err(|_| Error::Parse(format!("bad maze header {header:?}")))?;
        if n == 0 {
            return Err(Error::InvalidParameter("maze size must be at least 1".into()));
        }
        let mut grid = MazeGrid::open(n);
        for line in lines {
            let (a, b) = line
                .split_once('-')
                .ok_or_else(|| Error::Parse(format!("bad wall line {line:?}")))?;
            let (a, b) = (parse_cell(a)?, parse_cell(b)?);
            let slot = grid
                .slot_between(a, b)
                .ok_or_else(|| Error::Parse(format!("cells {a} and {b} are not adjacent")))?;
            grid.walls[slot] = true;
        }
        Ok(grid)
    }
}

fn parse_cell(s: &str) -> Result<Cell> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| Error::Parse(format!("bad cell {s:?}")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("bad coordinate {v:?}")))
    };
    Ok(Cell::new(parse(x)?, parse(y)?))
}

impl Serialize for MazeGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_text())
    }
}

impl<'de> Deserialize<'de> for MazeGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        MazeGrid::from_text(&text).map_err(serde::de::Error::custom)
    }
}

/// Generates a maze: an iterative randomized DFS from cell `(0, 0)` carves a
/// perfect maze, then `round(retain_fraction * residual)` of the residual
/// walls are kept, chosen uniformly at random.
pub fn generate_maze(n: usize, seed: u64, retain_fraction: f64) -> Result<MazeGrid> {
    if n == 0 {
        return Err(Error::InvalidParameter("maze size must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&retain_fraction) {
        return Err(Error::InvalidParameter(format!(
            "retain fraction {retain_fraction} outside [0, 1]"
        )));
    }
    let mut rng = Rng::derive(seed, &[n as u64]);
    let mut grid = MazeGrid::closed(n);
    let mut visited = vec![false; n * n];
    let mut stack = vec![Cell::new(0, 0)];
    visited[0] = true;
    let mut candidates: Vec<Cell> = Vec::with_capacity(4);
    while let Some(&current) = stack.last() {
        candidates.clear();
        candidates.extend(
            grid.neighbors(current)
                .filter(|nb| !visited[grid.cell_index(*nb)]),
        );
        if candidates.is_empty() {
            stack.pop();
            continue;
        }
        let next = candidates[rng.index(candidates.len())];
        let slot = grid.slot_between(current, next).expect("adjacent");
        grid.walls[slot] = false;
        visited[grid.cell_index(next)] = true;
        stack.push(next);
    }

    let mut residual: Vec<usize> = grid.wall_slots().collect();
    let keep = retained_wall_count(n, retain_fraction);
    rng.shuffle(&mut residual);
    for &slot in &residual[keep..] {
        grid.walls[slot] = false;
    }
    Ok(grid)
}

/// BFS step count between two cells; `None` when `b` is unreachable.
pub fn shortest_path_length(grid: &MazeGrid, a: Cell, b: Cell) -> Result<Option<usize>> {
    if !grid.contains(a) || !grid.contains(b) {
        return Err(Error::InvalidParameter(format!("cell outside {0}x{0} grid", grid.n)));
    }
    Ok(grid.distances_from(a)[grid.cell_index(b)])
}
