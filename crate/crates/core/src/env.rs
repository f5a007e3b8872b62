//! Single environment: one scenario configuration, one episode, frame skip.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::{detect_events_into, step_physics, Action};
use crate::error::Result;
use crate::render::{render_into, FRAME_LEN};
use crate::scenario::{scenario_step, EpisodeState, Event, ScenarioConfig, Termination};

pub const DEFAULT_FRAME_SKIP: u32 = 4;

/// Summary of a finished episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeInfo {
    pub config_index: usize,
    pub episode_return: f64,
    pub length: u32,
    pub success: bool,
    pub termination: Termination,
    pub correct_pickups: u32,
    pub wrong_pickups: u32,
    /// Find-and-return: goal object reached at least once.
    pub found: bool,
}

impl EpisodeInfo {
    pub fn from_state(config_index: usize, st: &EpisodeState) -> Self {
        EpisodeInfo {
            config_index,
            episode_return: st.cumulative_return,
            length: st.t,
            success: st.success(),
            termination: st.termination.unwrap_or(Termination::StepLimit),
            correct_pickups: st.correct_pickups,
            wrong_pickups: st.wrong_pickups,
            found: st.found,
        }
    }
}

/// Outcome of one decision step.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub reward: f64,
    pub done: bool,
    pub events: Vec<Event>,
}

#[derive(Clone, Debug)]
pub struct Env {
    cfg: Arc<ScenarioConfig>,
    state: EpisodeState,
    frame_skip: u32,
    events: Vec<Event>,
}

impl Env {
    pub fn new(cfg: Arc<ScenarioConfig>, episode_seed: u64, frame_skip: u32) -> Self {
        let state = EpisodeState::new(&cfg, episode_seed);
        Env {
            cfg,
            state,
            frame_skip: frame_skip.max(1),
            events: Vec::with_capacity(4),
        }
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn state(&self) -> &EpisodeState {
        &self.state
    }

    pub fn frame_skip(&self) -> u32 {
        self.frame_skip
    }

    /// Starts a new episode on `cfg`.
    pub fn reset(&mut self, cfg: Arc<ScenarioConfig>, episode_seed: u64) {
        self.state = EpisodeState::new(&cfg, episode_seed);
        self.cfg = cfg;
    }

    /// Applies `action` for `frame_skip` physics ticks, gathering events on
    /// every tick, then scores the decision step once.
    pub fn step(&mut self, action: Action) -> Result<Transition> {
        self.events.clear();
        for _ in 0..self.frame_skip {
            step_physics(&self.cfg, &mut self.state, action);
            detect_events_into(&self.cfg, &self.state, &mut self.events);
        }
        let out = scenario_step(&self.cfg, &mut self.state, &self.events)?;
        Ok(Transition {
            reward: out.reward,
            done: out.done,
            events: self.events.clone(),
        })
    }

    pub fn render_into(&self, frame: &mut [u8]) {
        render_into(&self.cfg, &self.state, frame);
    }

    pub fn render(&self) -> Vec<u8> {
        let mut frame = vec![0u8; FRAME_LEN];
        self.render_into(&mut frame);
        frame
    }
}
