//! Egocentric 64x112 raycast renderer.
//!
//! One grid-DDA ray per column over a 90° field of view. Walls are flat
//! shaded with `1 / (1 + 0.3 d)` attenuation; objects are depth-sorted
//! billboards clipped against the per-column wall depth.

use std::io::Write;
use std::path::Path;

use crate::engine::Pose;
use crate::maze::MazeGrid;
use crate::scenario::{EpisodeState, ItemColor, ObjectKind, ScenarioConfig};

pub const OBS_HEIGHT: usize = 64;
pub const OBS_WIDTH: usize = 112;
pub const OBS_CHANNELS: usize = 3;
pub const PLANE_LEN: usize = OBS_HEIGHT * OBS_WIDTH;
/// Bytes in one channel-first frame.
pub const FRAME_LEN: usize = OBS_CHANNELS * PLANE_LEN;
pub const WALL_SCALE: f64 = 48.0;
pub const HORIZON: usize = OBS_HEIGHT / 2;
const FOCAL: f64 = OBS_WIDTH as f64 / 2.0;
/// World-space wall height implied by `WALL_SCALE` and the focal length.
pub const WALL_HEIGHT: f64 = WALL_SCALE / FOCAL;
const SHADE_K: f64 = 0.3;
const NEAR_CLIP: f64 = 0.05;

pub type Rgb = [u8; 3];

pub const CEILING: Rgb = [48, 48, 48];
pub const FLOOR: Rgb = [72, 50, 30];
pub const WALL_X_FACE: Rgb = [150, 150, 150];
pub const WALL_Y_FACE: Rgb = [118, 118, 118];
pub const RED: Rgb = [255, 0, 0];
pub const GREEN: Rgb = [0, 255, 0];
pub const EXIT_PAD: Rgb = [40, 220, 60];
pub const ENTRY_MARKER: Rgb = [30, 200, 30];
/// Hue per position in the collection order.
pub const ORDER_HUES: [Rgb; 8] = [
    [255, 40, 40],
    [255, 160, 0],
    [240, 240, 0],
    [0, 220, 120],
    [0, 200, 255],
    [40, 80, 255],
    [170, 60, 255],
    [255, 60, 200],
];

/// One rendered frame plus scalar game variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// Channel-first `3 x 64 x 112` bytes.
    pub pixels: Vec<u8>,
    /// Health for the two-color task, otherwise empty.
    pub vars: Vec<f32>,
}

impl Observation {
    pub fn pixel(&self, row: usize, col: usize) -> Rgb {
        pixel_at(&self.pixels, row, col)
    }
}

pub fn pixel_at(frame: &[u8], row: usize, col: usize) -> Rgb {
    let i = row * OBS_WIDTH + col;
    [frame[i], frame[PLANE_LEN + i], frame[2 * PLANE_LEN + i]]
}

/// Billboard appearance: (color, width, height) in world units.
pub fn sprite_style(object: ObjectKind) -> (Rgb, f64, f64) {
    let color = |c: ItemColor| match c {
        ItemColor::Red => RED,
        ItemColor::Green => GREEN,
    };
    match object {
        ObjectKind::Exit => (EXIT_PAD, 0.6, 0.08),
        ObjectKind::Entry => (ENTRY_MARKER, 0.25, 0.4),
        ObjectKind::Goal => (RED, 0.3, 0.35),
        ObjectKind::OrderedItem { order } => (ORDER_HUES[order % ORDER_HUES.len()], 0.3, 0.35),
        ObjectKind::ColorItem { color: c } => (color(c), 0.3, 0.3),
        ObjectKind::Totem { color: c } => (color(c), 0.5, WALL_HEIGHT),
    }
}

/// Wall column height in pixels for a perpendicular distance.
pub fn column_height(perp: f64) -> usize {
    (WALL_SCALE / perp).round().min(OBS_HEIGHT as f64) as usize
}

fn shade(c: Rgb, dist: f64) -> Rgb {
    let k = 1.0 / (1.0 + SHADE_K * dist);
    [
        (c[0] as f64 * k) as u8,
        (c[1] as f64 * k) as u8,
        (c[2] as f64 * k) as u8,
    ]
}

/// Result of casting one column ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WallHit {
    /// Distance along the view direction.
    pub perp: f64,
    /// Hit a wall running along y (crossed an x boundary).
    pub x_face: bool,
}

/// Camera-space offset of column `col`, in `(-1, 1)` from left to right.
pub fn column_offset(col: usize) -> f64 {
    1.0 - 2.0 * (col as f64 + 0.5) / OBS_WIDTH as f64
}

/// Casts a ray from `pose` through camera offset `cam` (+1 is the left edge).
pub fn cast_column(maze: &MazeGrid, pose: &Pose, cam: f64) -> WallHit {
    let (s, c) = pose.heading.sin_cos();
    // Left of the view direction is +90 degrees.
    let rx = c - s * cam;
    let ry = s + c * cam;
    let mut mx = pose.x.floor() as i64;
    let mut my = pose.y.floor() as i64;
    let delta_x = if rx == 0.0 { f64::INFINITY } else { (1.0 / rx).abs() };
    let delta_y = if ry == 0.0 { f64::INFINITY } else { (1.0 / ry).abs() };
    let (step_x, mut side_x) = if rx < 0.0 {
        (-1, (pose.x - mx as f64) * delta_x)
    } else {
        (1, (mx as f64 + 1.0 - pose.x) * delta_x)
    };
    let (step_y, mut side_y) = if ry < 0.0 {
        (-1, (pose.y - my as f64) * delta_y)
    } else {
        (1, (my as f64 + 1.0 - pose.y) * delta_y)
    };
    let limit = 4 * maze.n() + 4;
    for _ in 0..limit {
        if side_x < side_y {
            let edge_x = if step_x > 0 { mx + 1 } else { mx };
            if maze.edge_solid(true, edge_x, my) {
                return WallHit { perp: side_x, x_face: true };
            }
            mx += step_x;
            side_x += delta_x;
        } else {
            let edge_y = if step_y > 0 { my + 1 } else { my };
            if maze.edge_solid(false, mx, edge_y) {
                return WallHit { perp: side_y, x_face: false };
            }
            my += step_y;
            side_y += delta_y;
        }
    }
    // Unreachable for poses inside the grid: the border is solid.
    WallHit { perp: side_x.min(side_y), x_face: true }
}

fn put(frame: &mut [u8], row: usize, col: usize, c: Rgb) {
    let i = row * OBS_WIDTH + col;
    frame[i] = c[0];
    frame[PLANE_LEN + i] = c[1];
    frame[2 * PLANE_LEN + i] = c[2];
}

#[derive(Clone, Copy)]
struct Sprite {
    placement: usize,
    depth: f64,
    lateral: f64,
    color: Rgb,
    width: f64,
    height: f64,
}

/// Renders the view from `st` into a channel-first frame buffer.
pub fn render_into(cfg: &ScenarioConfig, st: &EpisodeState, frame: &mut [u8]) {
    render_impl(cfg, st, frame, None);
}

pub fn render(cfg: &ScenarioConfig, st: &EpisodeState) -> Observation {
    let mut pixels = vec![0u8; FRAME_LEN];
    render_into(cfg, st, &mut pixels);
    Observation {
        pixels,
        vars: game_vars(cfg, st),
    }
}

pub fn game_vars(cfg: &ScenarioConfig, st: &EpisodeState) -> Vec<f32> {
    if cfg.kind.has_health() {
        vec![st.health as f32]
    } else {
        Vec::new()
    }
}

/// Renders and returns, per placement, the number of final pixels it owns.
pub fn render_with_visibility(cfg: &ScenarioConfig, st: &EpisodeState, frame: &mut [u8]) -> Vec<usize> {
    let mut owner = vec![u16::MAX; PLANE_LEN];
    render_impl(cfg, st, frame, Some(&mut owner));
    let mut counts = vec![0usize; cfg.placements.len()];
    for &o in &owner {
        if o != u16::MAX {
            counts[o as usize] += 1;
        }
    }
    counts
}

/// Whether any pixel of the two-color totem is on screen.
pub fn totem_visible(cfg: &ScenarioConfig, st: &EpisodeState) -> bool {
    let Some(totem) = cfg
        .placements
        .iter()
        .position(|p| matches!(p.object, ObjectKind::Totem { .. }))
    else {
        return false;
    };
    let mut frame = vec![0u8; FRAME_LEN];
    render_with_visibility(cfg, st, &mut frame)[totem] > 0
}

fn render_impl(cfg: &ScenarioConfig, st: &EpisodeState, frame: &mut [u8], mut owner: Option<&mut [u16]>) {
    assert_eq!(frame.len(), FRAME_LEN, "frame buffer size");
    let pose = &st.pose;
    let mut zbuf = [0f64; OBS_WIDTH];

    for (rows, color) in [(0..HORIZON, CEILING), (HORIZON..OBS_HEIGHT, FLOOR)] {
        for (ch, &v) in color.iter().enumerate() {
            let base = ch * PLANE_LEN;
            frame[base + rows.start * OBS_WIDTH..base + rows.end * OBS_WIDTH].fill(v);
        }
    }

    for (col, z) in zbuf.iter_mut().enumerate() {
        let hit = cast_column(&cfg.maze, pose, column_offset(col));
        *z = hit.perp;
        let h = column_height(hit.perp);
        let top = (OBS_HEIGHT - h) / 2;
        let c = shade(if hit.x_face { WALL_X_FACE } else { WALL_Y_FACE }, hit.perp);
        for (ch, &v) in c.iter().enumerate() {
            let base = ch * PLANE_LEN + col;
            for row in top..top + h {
                frame[base + row * OBS_WIDTH] = v;
            }
        }
    }

    let (s, c) = pose.heading.sin_cos();
    let mut sprites: Vec<Sprite> = Vec::with_capacity(cfg.placements.len());
    for (p, placement) in cfg.placements.iter().enumerate() {
        if !st.is_present(cfg, p) {
            continue;
        }
        let (cx, cy) = st.positions[p].center();
        let (vx, vy) = (cx - pose.x, cy - pose.y);
        let depth = vx * c + vy * s;
        if depth < NEAR_CLIP {
            continue;
        }
        // Positive lateral offsets are to the left.
        let lateral = -vx * s + vy * c;
        let (color, width, height) = sprite_style(placement.object);
        sprites.push(Sprite { placement: p, depth, lateral, color, width, height });
    }
    sprites.sort_by(|a, b| b.depth.total_cmp(&a.depth).then(a.placement.cmp(&b.placement)));

    for sp in &sprites {
        let scale = FOCAL / sp.depth;
        let center = FOCAL * (1.0 - sp.lateral / sp.depth);
        let half_w = 0.5 * sp.width * scale;
        let floor_row = HORIZON as f64 + 0.5 * WALL_HEIGHT * scale;
        let top_row = floor_row - sp.height * scale;
        let c0 = (center - half_w - 0.5).ceil().max(0.0);
        let c1 = (center + half_w - 0.5).floor().min(OBS_WIDTH as f64 - 1.0);
        let r0 = (top_row - 0.5).ceil().max(0.0);
        let r1 = (floor_row - 0.5).floor().min(OBS_HEIGHT as f64 - 1.0);
        if c0 > c1 || r0 > r1 {
            continue;
        }
        let color = shade(sp.color, sp.depth);
        for col in c0 as usize..=c1 as usize {
            if sp.depth >= zbuf[col] {
                continue;
            }
            for row in r0 as usize..=r1 as usize {
                put(frame, row, col, color);
                if let Some(owner) = owner.as_deref_mut() {
                    owner[row * OBS_WIDTH + col] = sp.placement as u16;
                }
            }
        }
    }
}

/// Writes a channel-first frame as binary PPM.
pub fn write_ppm(frame: &[u8], path: &Path) -> std::io::Result<()> {
    let mut out = Vec::with_capacity(FRAME_LEN + 32);
    write!(out, "P6\n{OBS_WIDTH} {OBS_HEIGHT}\n255\n")?;
    for i in 0..PLANE_LEN {
        out.extend_from_slice(&[frame[i], frame[PLANE_LEN + i], frame[2 * PLANE_LEN + i]]);
    }
    std::fs::write(path, out)
}

/// Interleaved RGB rows (height-major) for image encoders.
pub fn to_interleaved(frame: &[u8]) -> Vec<u8> {
    (0..PLANE_LEN)
        .flat_map(|i| [frame[i], frame[PLANE_LEN + i], frame[2 * PLANE_LEN + i]])
        .collect()
}
