//! Procedurally generated first-person maze tasks: maze generation, task
//! rules, a raycast renderer and batched environments.

pub mod engine;
pub mod env;
pub mod error;
pub mod maze;
pub mod render;
pub mod rng;
pub mod scenario;
pub mod vecenv;

pub use engine::{Action, Pose};
pub use env::{Env, EpisodeInfo, DEFAULT_FRAME_SKIP};
pub use error::{Error, Result};
pub use maze::{generate_maze, shortest_path_length, Cell, MazeGrid};
pub use render::{Observation, FRAME_LEN, OBS_CHANNELS, OBS_HEIGHT, OBS_WIDTH};
pub use scenario::{build_config_set, ConfigSet, EpisodeState, Event, ScenarioConfig, ScenarioKind, Split};
pub use vecenv::VecEnv;
