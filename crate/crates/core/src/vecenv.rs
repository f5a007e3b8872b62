//! Batched environments with frame skip and auto-reset.

use std::sync::Arc;

use rayon::prelude::*;

use crate::engine::Action;
use crate::env::{EpisodeInfo, Env};
use crate::error::{Error, Result};
use crate::render::FRAME_LEN;
use crate::rng::{derive_seed, Rng};
use crate::scenario::ScenarioConfig;

#[derive(Debug)]
struct Slot {
    id: usize,
    episode: u64,
    config_index: usize,
    env: Env,
}

impl Slot {
    /// Episode `episode` of slot `id` uses seed
    /// `derive_seed(run_seed, &[id, episode])` both to pick its configuration
    /// and to seed the episode stream.
    fn begin(&mut self, configs: &[Arc<ScenarioConfig>], run_seed: u64) {
        let seed = derive_seed(run_seed, &[self.id as u64, self.episode]);
        self.config_index = Rng::new(seed).index(configs.len());
        self.env.reset(configs[self.config_index].clone(), seed);
    }

    fn step(
        &mut self,
        action: Action,
        configs: &[Arc<ScenarioConfig>],
        run_seed: u64,
        frame: &mut [u8],
    ) -> Result<(f64, bool, Option<EpisodeInfo>)> {
        let tr = self.env.step(action)?;
        let info = if tr.done {
            let info = EpisodeInfo::from_state(self.config_index, self.env.state());
            self.episode += 1;
            self.begin(configs, run_seed);
            Some(info)
        } else {
            None
        };
        self.env.render_into(frame);
        Ok((tr.reward, tr.done, info))
    }
}

/// Borrowed results of one batched step.
#[derive(Debug)]
pub struct StepView<'a> {
    /// `N x 3 x 64 x 112` bytes, channel-first per slot.
    pub obs: &'a [u8],
    pub rewards: &'a [f64],
    pub dones: &'a [bool],
    /// Summary of the episode that finished in each slot, if any.
    pub infos: &'a [Option<EpisodeInfo>],
}

/// `N` environment slots sampling configurations uniformly from one split.
///
/// Slots are stepped on a worker pool; each slot's trajectory depends only on
/// `(run_seed, slot, episode index)` and its actions, so results are the same
/// for every worker count.
pub struct VecEnv {
    configs: Arc<[Arc<ScenarioConfig>]>,
    slots: Vec<Slot>,
    run_seed: u64,
    frame_skip: u32,
    obs: Vec<u8>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    infos: Vec<Option<EpisodeInfo>>,
    pool: Option<rayon::ThreadPool>,
    workers: usize,
    decision_steps: u64,
}

impl VecEnv {
    /// Creates `num_envs` slots and starts their first episodes with
    /// `run_seed`.
    pub fn new(
        configs: &[ScenarioConfig],
        num_envs: usize,
        frame_skip: u32,
        workers: usize,
        run_seed: u64,
    ) -> Result<Self> {
        if configs.is_empty() {
            return Err(Error::Config("configuration split is empty".into()));
        }
        if frame_skip == 0 {
            return Err(Error::InvalidParameter("frame skip must be at least 1".into()));
        }
        let configs: Arc<[Arc<ScenarioConfig>]> = configs.iter().cloned().map(Arc::new).collect();
        let workers = workers.max(1);
        let pool = if workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::Config(format!("worker pool: {e}")))?,
            )
        } else {
            None
        };
        let slots = (0..num_envs)
            .map(|id| Slot {
                id,
                episode: 0,
                config_index: 0,
                env: Env::new(configs[0].clone(), 0, frame_skip),
            })
            .collect();
        let mut venv = VecEnv {
            configs,
            slots,
            run_seed,
            frame_skip,
            obs: vec![0; num_envs * FRAME_LEN],
            rewards: vec![0.0; num_envs],
            dones: vec![false; num_envs],
            infos: vec![None; num_envs],
            pool,
            workers,
            decision_steps: 0,
        };
        venv.reset_all(run_seed);
        Ok(venv)
    }

    pub fn num_envs(&self) -> usize {
        self.slots.len()
    }

    pub fn frame_skip(&self) -> u32 {
        self.frame_skip
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn configs(&self) -> &[Arc<ScenarioConfig>] {
        &self.configs
    }

    /// Decision steps taken across all slots since construction.
    pub fn decision_steps(&self) -> u64 {
        self.decision_steps
    }

    /// Restarts every slot at episode 0 of `run_seed` and returns the first
    /// frames.
    pub fn reset_all(&mut self, run_seed: u64) -> &[u8] {
        self.run_seed = run_seed;
        let configs = self.configs.clone();
        for (slot, frame) in self.slots.iter_mut().zip(self.obs.chunks_exact_mut(FRAME_LEN)) {
            slot.episode = 0;
            slot.begin(&configs, run_seed);
            slot.env.render_into(frame);
        }
        self.rewards.fill(0.0);
        self.dones.fill(false);
        self.infos.fill(None);
        &self.obs
    }

    pub fn obs(&self) -> &[u8] {
        &self.obs
    }

    /// Configuration index currently played by each slot.
    pub fn config_indices(&self) -> Vec<usize> {
        self.slots.iter().map(|s| s.config_index).collect()
    }

    pub fn envs(&self) -> impl Iterator<Item = &Env> {
        self.slots.iter().map(|s| &s.env)
    }

    /// Scalar game variables per slot (health for the two-color task).
    pub fn vars(&self) -> Vec<Vec<f32>> {
        self.slots
            .iter()
            .map(|s| crate::render::game_vars(s.env.config(), s.env.state()))
            .collect()
    }

    /// Steps every slot. Finished episodes are reported through `infos` and
    /// the slot's frame is the first frame of its next episode.
    pub fn step(&mut self, actions: &[Action]) -> Result<StepView<'_>> {
        if actions.len() != self.slots.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} actions, got {}",
                self.slots.len(),
                actions.len()
            )));
        }
        let configs = self.configs.clone();
        let run_seed = self.run_seed;
        let work = |((((slot, &action), frame), reward), (done, info)): (
            (((&mut Slot, &Action), &mut [u8]), &mut f64),
            (&mut bool, &mut Option<EpisodeInfo>),
        )|
         -> Result<()> {
            let (r, d, i) = slot.step(action, &configs, run_seed, frame)?;
            *reward = r;
            *done = d;
            *info = i;
            Ok(())
        };
        match &self.pool {
            Some(pool) => {
                let chunk = self.slots.len().div_ceil(self.workers).max(1);
                let slots = &mut self.slots;
                let obs = &mut self.obs;
                let rewards = &mut self.rewards;
                let dones = &mut self.dones;
                let infos = &mut self.infos;
                pool.install(|| {
                    slots
                        .par_iter_mut()
                        .zip(actions.par_iter())
                        .zip(obs.par_chunks_mut(FRAME_LEN))
                        .zip(rewards.par_iter_mut())
                        .zip(dones.par_iter_mut().zip(infos.par_iter_mut()))
                        .with_min_len(chunk)
                        .try_for_each(work)
                })?;
            }
            None => {
                self.slots
                    .iter_mut()
                    .zip(actions.iter())
                    .zip(self.obs.chunks_exact_mut(FRAME_LEN))
                    .zip(self.rewards.iter_mut())
                    .zip(self.dones.iter_mut().zip(self.infos.iter_mut()))
                    .try_for_each(work)?;
            }
        }
        self.decision_steps += self.slots.len() as u64;
        Ok(StepView {
            obs: &self.obs,
            rewards: &self.rewards,
            dones: &self.dones,
            infos: &self.infos,
        })
    }

    /// Flat-buffer step for foreign callers: action indices in, caller-owned
    /// observation, reward and done buffers out. Arguments are validated
    /// before any slot moves.
    pub fn step_into(
        &mut self,
        actions: &[i32],
        obs_out: &mut [u8],
        rewards_out: &mut [f32],
        dones_out: &mut [u8],
    ) -> Result<()> {
        let n = self.slots.len();
        if actions.len() != n || obs_out.len() != n * FRAME_LEN || rewards_out.len() != n || dones_out.len() != n {
            return Err(Error::InvalidArgument("buffer sizes do not match the environment count".into()));
        }
        let actions = actions
            .iter()
            .map(|&a| {
                usize::try_from(a)
                    .map_err(|_| Error::InvalidArgument(format!("action index {a} out of range")))
                    .and_then(Action::from_index)
            })
            .collect::<Result<Vec<_>>>()?;
        let view = self.step(&actions)?;
        obs_out.copy_from_slice(view.obs);
        for (dst, &r) in rewards_out.iter_mut().zip(view.rewards) {
            *dst = r as f32;
        }
        for (dst, &d) in dones_out.iter_mut().zip(view.dones) {
            *dst = d as u8;
        }
        Ok(())
    }
}
