//! World kinematics, wall collision and event detection.
//!
//! | constant        | value        |
//! |-----------------|--------------|
//! | cell size       | 1.0 unit     |
//! | `AGENT_RADIUS`  | 0.2          |
//! | `PICKUP_RADIUS` | 0.35         |
//! | `SPEED`         | 0.05 / tick  |
//! | `TURN_RATE`     | 4.5° / tick  |
//! | `WALL_SCALE`    | 48           |
//! | field of view   | 90°          |
//!
//! These values are versioned through [`ENGINE_VERSION`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maze::MazeGrid;
use crate::scenario::{EpisodeState, Event, ScenarioConfig};

pub const ENGINE_VERSION: u32 = 1;
pub const AGENT_RADIUS: f64 = 0.2;
pub const PICKUP_RADIUS: f64 = 0.35;
pub const SPEED: f64 = 0.05;
pub const TURN_RATE: f64 = 4.5 * std::f64::consts::PI / 180.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Radians, counter-clockwise from +x, kept in `[0, 2π)`.
    pub heading: f64,
}

/// Discrete action set. The index order is part of the checkpoint contract.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Action {
    Forward = 0,
    Backward = 1,
    TurnLeft = 2,
    TurnRight = 3,
    ForwardLeft = 4,
    ForwardRight = 5,
}

impl Action {
    pub const COUNT: usize = 6;
    pub const ALL: [Action; 6] = [
        Action::Forward,
        Action::Backward,
        Action::TurnLeft,
        Action::TurnRight,
        Action::ForwardLeft,
        Action::ForwardRight,
    ];

    pub fn from_index(i: usize) -> Result<Action> {
        Action::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("action index {i} out of range")))
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// (turn direction, move direction) in {-1, 0, 1}.
    fn components(self) -> (f64, f64) {
        match self {
            Action::Forward => (0.0, 1.0),
            Action::Backward => (0.0, -1.0),
            Action::TurnLeft => (1.0, 0.0),
            Action::TurnRight => (-1.0, 0.0),
            Action::ForwardLeft => (1.0, 1.0),
            Action::ForwardRight => (-1.0, 1.0),
        }
    }
}

/// An axis-aligned wall segment inflated by the agent radius.
#[derive(Clone, Copy, Debug)]
struct Block {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

/// Solid lattice edges near `(x, y)`, inflated by `AGENT_RADIUS`.
fn nearby_blocks(maze: &MazeGrid, x: f64, y: f64, out: &mut Vec<Block>) {
    out.clear();
    let (fx, fy) = (x.floor() as i64, y.floor() as i64);
    let r = AGENT_RADIUS;
    for ex in fx - 1..=fx + 2 {
        for ey in fy - 1..=fy + 1 {
            if maze.edge_solid(true, ex, ey) {
                let ex = ex as f64;
                let ey = ey as f64;
                out.push(Block { x0: ex - r, x1: ex + r, y0: ey - r, y1: ey + 1.0 + r });
            }
        }
    }
    for ex in fx - 1..=fx + 1 {
        for ey in fy - 1..=fy + 2 {
            if maze.edge_solid(false, ex, ey) {
                let ex = ex as f64;
                let ey = ey as f64;
                out.push(Block { x0: ex - r, x1: ex + 1.0 + r, y0: ey - r, y1: ey + r });
            }
        }
    }
}

/// Moves the agent by `(dx, dy)` one axis at a time, stopping each axis at
/// the first inflated wall it would enter. The blocked component is zeroed;
/// the other component is kept.
pub fn slide(maze: &MazeGrid, pose: &mut Pose, dx: f64, dy: f64) {
    let mut blocks = Vec::with_capacity(24);
    nearby_blocks(maze, pose.x, pose.y, &mut blocks);
    if dx != 0.0 {
        let mut target = pose.x + dx;
        for b in &blocks {
            if pose.y <= b.y0 || pose.y >= b.y1 {
                continue;
            }
            if dx > 0.0 && pose.x <= b.x0 && target > b.x0 {
                target = b.x0;
            } else if dx < 0.0 && pose.x >= b.x1 && target < b.x1 {
                target = b.x1;
            }
        }
        pose.x = target;
    }
    if dy != 0.0 {
        let mut target = pose.y + dy;
        for b in &blocks {
            if pose.x <= b.x0 || pose.x >= b.x1 {
                continue;
            }
            if dy > 0.0 && pose.y <= b.y0 && target > b.y0 {
                target = b.y0;
            } else if dy < 0.0 && pose.y >= b.y1 && target < b.y1 {
                target = b.y1;
            }
        }
        pose.y = target;
    }
}

/// One physics tick on a bare pose: turn, then move along the new heading.
pub fn advance_pose(maze: &MazeGrid, pose: &mut Pose, action: Action) {
    let (turn, mv) = action.components();
    if turn != 0.0 {
        pose.heading = (pose.heading + turn * TURN_RATE).rem_euclid(std::f64::consts::TAU);
    }
    if mv != 0.0 {
        let (s, c) = pose.heading.sin_cos();
        slide(maze, pose, mv * SPEED * c, mv * SPEED * s);
    }
}

/// One physics tick of the episode.
pub fn step_physics(cfg: &ScenarioConfig, st: &mut EpisodeState, action: Action) {
    debug_assert!(!st.done, "physics step on a finished episode");
    advance_pose(&cfg.maze, &mut st.pose, action);
}

/// Pickup events for present pickups and arrival events for zones whose
/// center lies strictly within `PICKUP_RADIUS` of the agent.
pub fn detect_events(cfg: &ScenarioConfig, st: &EpisodeState) -> Vec<Event> {
    let mut out = Vec::new();
    detect_events_into(cfg, st, &mut out);
    out
}

/// Appends events not already listed in `out`.
pub fn detect_events_into(cfg: &ScenarioConfig, st: &EpisodeState, out: &mut Vec<Event>) {
    let r2 = PICKUP_RADIUS * PICKUP_RADIUS;
    for (p, placement) in cfg.placements.iter().enumerate() {
        let event = if placement.object.is_pickup() {
            if st.collected[p] {
                continue;
            }
            Event::Pickup(p)
        } else if placement.object.is_zone() {
            Event::Arrival(p)
        } else {
            continue;
        };
        let (cx, cy) = st.positions[p].center();
        let (dx, dy) = (st.pose.x - cx, st.pose.y - cy);
        if dx * dx + dy * dy < r2 && !out.contains(&event) {
            out.push(event);
        }
    }
}

/// Euclidean distance from a point to the closest solid wall segment.
pub fn wall_clearance(maze: &MazeGrid, x: f64, y: f64) -> f64 {
    let n = maze.n() as i64;
    let mut best = f64::INFINITY;
    let seg = |ax: f64, ay: f64, bx: f64, by: f64| {
        let (vx, vy) = (bx - ax, by - ay);
        let t = (((x - ax) * vx + (y - ay) * vy) / (vx * vx + vy * vy)).clamp(0.0, 1.0);
        let (px, py) = (ax + t * vx, ay + t * vy);
        ((x - px).powi(2) + (y - py).powi(2)).sqrt()
    };
    for a in 0..=n {
        for b in 0..n {
            if maze.edge_solid(true, a, b) {
                best = best.min(seg(a as f64, b as f64, a as f64, b as f64 + 1.0));
            }
            if maze.edge_solid(false, b, a) {
                best = best.min(seg(b as f64, a as f64, b as f64 + 1.0, a as f64));
            }
        }
    }
    best
}
