//! Recording recurrent state along an episode.
//!
//! Hidden-state matrix files are little-endian:
//! ```text
//! magic "RMZH", u32 version (1), u32 rows, u32 cols, rows*cols f32 (row-major)
//! ```
//! Row `t` is the GRU state after observing step `t`.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use raymaze_a2c::policy::{greedy_action, sample_action, ActionMode, Agent};
use raymaze_a2c::Net;
use raymaze_core::render::totem_visible;
use raymaze_core::rng::{derive_seed, Rng};
use raymaze_core::{Action, Env, ScenarioConfig};

use crate::error::{CliError, CliResult};
use crate::frames::{thumbnail, write_png_rgb};

pub const MATRIX_MAGIC: &[u8; 4] = b"RMZH";
pub const MATRIX_VERSION: u32 = 1;
pub const THUMB_FACTOR: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub totem_visible: bool,
    pub action: usize,
    pub reward: f64,
    /// `‖h_t - h_{t-1}‖`; absent for the first step.
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub config_index: usize,
    pub episode_seed: u64,
    pub steps: usize,
    pub episode_return: f64,
    pub finished: bool,
    /// Step with the largest hidden-state change, if any change is non-zero.
    pub change_point: Option<usize>,
    pub max_delta: f64,
    pub first_totem_visible: Option<usize>,
    /// `|change_point - first_totem_visible| <= tolerance` when both exist.
    pub aligned: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub summary: TraceSummary,
    pub steps: Vec<TraceStep>,
    pub hidden: Vec<Vec<f32>>,
    /// Interleaved RGB thumbnails, one per step.
    pub thumbnails: Vec<Vec<u8>>,
}

/// L2 distances between consecutive rows.
pub fn deltas(hidden: &[Vec<f32>]) -> Vec<f64> {
    hidden
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| ((b - a) as f64).powi(2)).sum::<f64>().sqrt())
        .collect()
}

/// Step index (1-based into the hidden sequence) of the largest delta;
/// `None` when the series is empty or all zero. Ties go to the earliest.
pub fn change_point(deltas: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &d) in deltas.iter().enumerate() {
        if d > 0.0 && best.is_none_or(|(_, b)| d > b) {
            best = Some((i + 1, d));
        }
    }
    best.map(|(t, _)| t)
}

#[derive(Clone, Debug)]
pub struct TraceOptions {
    pub max_steps: usize,
    pub frame_skip: u32,
    pub mode: ActionMode,
    pub tolerance: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            max_steps: raymaze_core::scenario::STEP_LIMIT as usize,
            frame_skip: raymaze_core::DEFAULT_FRAME_SKIP,
            mode: ActionMode::Sampled,
            tolerance: 2,
        }
    }
}

/// Plays one episode (or `max_steps` decision steps) and records the GRU
/// state, pose and totem visibility at every step. Actions draw from
/// `derive_seed(episode_seed, &[1])`, as in evaluation.
pub fn trace_episode(
    net: &Net<f32>,
    cfg: Arc<ScenarioConfig>,
    config_index: usize,
    episode_seed: u64,
    opts: &TraceOptions,
) -> CliResult<Trace> {
    let mut agent = Agent::new(net.clone(), 1);
    let na = net.arch().actions;
    let mut env = Env::new(cfg.clone(), episode_seed, opts.frame_skip);
    let mut rng = Rng::new(derive_seed(episode_seed, &[1]));
    let mut steps = Vec::new();
    let mut hidden = Vec::new();
    let mut thumbnails = Vec::new();
    let mut finished = false;
    let mut episode_return = 0.0;
    for t in 0..opts.max_steps {
        let frame = env.render();
        let visible = totem_visible(&cfg, env.state());
        let pose = env.state().pose;
        let cache = agent.step(&frame)?;
        let logits = &cache.logits[..na];
        let action = match opts.mode {
            ActionMode::Greedy => greedy_action(logits),
            ActionMode::Sampled => sample_action(logits, &mut rng),
        };
        hidden.push(cache.hidden.clone());
        thumbnails.push(thumbnail(&frame, THUMB_FACTOR));
        let tr = env.step(Action::from_index(action)?)?;
        episode_return += tr.reward;
        steps.push(TraceStep {
            t,
            x: pose.x,
            y: pose.y,
            heading: pose.heading,
            totem_visible: visible,
            action,
            reward: tr.reward,
            delta: None,
        });
        if tr.done {
            finished = true;
            break;
        }
    }
    let ds = deltas(&hidden);
    for (s, d) in steps.iter_mut().skip(1).zip(&ds) {
        s.delta = Some(*d);
    }
    let cp = change_point(&ds);
    let first_visible = steps.iter().position(|s| s.totem_visible);
    let summary = TraceSummary {
        config_index,
        episode_seed,
        steps: steps.len(),
        episode_return,
        finished,
        change_point: cp,
        max_delta: ds.iter().copied().fold(0.0, f64::max),
        first_totem_visible: first_visible,
        aligned: match (cp, first_visible) {
            (Some(c), Some(v)) => Some(c.abs_diff(v) <= opts.tolerance),
            _ => None,
        },
    };
    Ok(Trace { summary, steps, hidden, thumbnails })
}

pub fn write_matrix(rows: &[Vec<f32>], path: &Path) -> CliResult<()> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Runtime("ragged hidden-state matrix".into()));
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MATRIX_MAGIC)?;
    out.write_all(&MATRIX_VERSION.to_le_bytes())?;
    out.write_all(&(rows.len() as u32).to_le_bytes())?;
    out.write_all(&(cols as u32).to_le_bytes())?;
    for v in rows.iter().flatten() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> CliResult<Vec<Vec<f32>>> {
    let bytes = std::fs::read(path)?;
    let bad = || CliError::Runtime(format!("{} is not a hidden-state matrix", path.display()));
    if bytes.len() < 16 || &bytes[..4] != MATRIX_MAGIC {
        return Err(bad());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (rows, cols) = (word(8), word(12));
    if bytes.len() != 16 + rows * cols * 4 {
        return Err(bad());
    }
    let vals: Vec<f32> = bytes[16..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(if cols == 0 { vec![Vec::new(); rows] } else { vals.chunks(cols).map(<[f32]>::to_vec).collect() })
}

/// Writes `trace.jsonl` (summary line, then one line per step),
/// `hidden.bin` and `thumbs/step_NNNN.png` into `dir`.
pub fn write_trace(trace: &Trace, dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir.join("thumbs"))?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("trace.jsonl"))?);
    serde_json::to_writer(&mut out, &trace.summary)?;
    out.write_all(b"\n")?;
    for s in &trace.steps {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    write_matrix(&trace.hidden, &dir.join("hidden.bin"))?;
    let (w, h) = (raymaze_core::OBS_WIDTH / THUMB_FACTOR, raymaze_core::OBS_HEIGHT / THUMB_FACTOR);
    for (t, thumb) in trace.thumbnails.iter().enumerate() {
        write_png_rgb(thumb, w, h, &dir.join("thumbs").join(format!("step_{t:04}.png")))?;
    }
    Ok(())
}
