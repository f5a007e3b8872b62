//! Synchronous advantage actor-critic training loop.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use raymaze_core::rng::{derive_seed, Rng};
use raymaze_core::{Action, ConfigSet, Split, VecEnv, FRAME_LEN};

use crate::arch::{Arch, Params};
use crate::checkpoint::{Checkpoint, CheckpointMeta};
use crate::error::{Error, Result};
use crate::loss::{a2c_loss, LossTerms, LossWeights};
use crate::net::{frames_to_input, Net, StepCache};
use crate::optim::{clip_global_norm, Optimizer, OptimizerKind};
use crate::policy::sample_action;
use crate::returns::compute_returns;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    /// γ
    pub gamma: f64,
    /// λ
    pub value_coef: f64,
    /// β
    pub entropy_coef: f64,
    pub learning_rate: f64,
    pub rollout_len: usize,
    pub num_envs: usize,
    /// Frames including skipped physics ticks.
    pub frame_budget: u64,
    pub grad_clip: f64,
    pub optimizer: OptimizerKind,
    pub frame_skip: u32,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            gamma: 0.99,
            value_coef: 0.5,
            entropy_coef: 0.01,
            learning_rate: 7e-4,
            rollout_len: 128,
            num_envs: 16,
            frame_budget: 2_000_000,
            grad_clip: 0.5,
            optimizer: OptimizerKind::Rmsprop,
            frame_skip: raymaze_core::DEFAULT_FRAME_SKIP,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.value_coef >= 0.0 && self.entropy_coef >= 0.0) {
            return bad("loss weights must be non-negative");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.rollout_len == 0 || self.num_envs == 0 || self.frame_skip == 0 {
            return bad("rollout length, environment count and frame skip must be at least 1");
        }
        if self.grad_clip.is_nan() || self.grad_clip < 0.0 {
            return bad("gradient clip must be non-negative");
        }
        Ok(())
    }

    pub fn frames_per_update(&self) -> u64 {
        (self.rollout_len * self.num_envs) as u64 * self.frame_skip as u64
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights::new(self.value_coef, self.entropy_coef)
    }
}

/// `T x N` transitions collected with the current parameters, time-major.
pub struct RolloutBatch {
    pub steps: usize,
    pub envs: usize,
    /// Raw observations, `T x N` frames.
    pub frames: Vec<u8>,
    pub frame_len: usize,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// Hidden-state resets applied at each step.
    pub resets: Vec<bool>,
    /// `V(s_t)` from the rollout-time forward pass.
    pub values: Vec<f64>,
    /// `V(s_{T+1})` per slot.
    pub bootstrap: Vec<f64>,
    /// Forward activations for each step.
    pub caches: Vec<StepCache<f32>>,
}

impl RolloutBatch {
    pub fn new(steps: usize, envs: usize, frame_len: usize) -> Self {
        RolloutBatch {
            steps,
            envs,
            frames: vec![0; steps * envs * frame_len],
            frame_len,
            actions: vec![0; steps * envs],
            rewards: vec![0.0; steps * envs],
            dones: vec![false; steps * envs],
            resets: vec![false; steps * envs],
            values: vec![0.0; steps * envs],
            bootstrap: vec![0.0; envs],
            caches: (0..steps).map(|_| StepCache::default()).collect(),
        }
    }

    pub fn frames_at(&self, t: usize) -> &[u8] {
        &self.frames[t * self.envs * self.frame_len..(t + 1) * self.envs * self.frame_len]
    }

    /// Bootstrapped returns, time-major.
    pub fn returns(&self, gamma: f64) -> Vec<f64> {
        let (t_len, n) = (self.steps, self.envs);
        let mut out = vec![0.0; t_len * n];
        for e in 0..n {
            let r: Vec<f64> = (0..t_len).map(|t| self.rewards[t * n + e]).collect();
            let d: Vec<bool> = (0..t_len).map(|t| self.dones[t * n + e]).collect();
            for (t, v) in compute_returns(&r, &d, self.bootstrap[e], gamma).into_iter().enumerate() {
                out[t * n + e] = v;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub loss: LossTerms,
    pub grad_norm: f64,
}

/// Parameters, optimizer state and gradient buffers.
pub struct Learner {
    pub net: Net<f32>,
    pub hyper: HyperParams,
    opt: Optimizer<f32>,
    grads: Params<f32>,
    input: Vec<f32>,
    updates: u64,
}

impl Learner {
    pub fn new(arch: Arch, params: Params<f32>, hyper: HyperParams) -> Result<Self> {
        hyper.validate()?;
        let opt = Optimizer::new(hyper.optimizer, hyper.learning_rate, &params);
        let grads = params.zeros_like();
        Ok(Learner { net: Net::new(arch, params)?, hyper, opt, grads, input: Vec::new(), updates: 0 })
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// One gradient step on the loss averaged over all `T x N` transitions.
    /// A non-finite loss or gradient leaves the parameters untouched.
    pub fn update(&mut self, batch: &mut RolloutBatch) -> Result<UpdateStats> {
        let (t_len, n) = (batch.steps, batch.envs);
        let na = self.net.arch().actions;
        let returns = batch.returns(self.hyper.gamma);
        let advantages: Vec<f64> = returns.iter().zip(&batch.values).map(|(r, v)| r - v).collect();
        let weights = self.hyper.loss_weights();
        let mut total = LossTerms::default();
        let mut dlogits = vec![vec![0f32; n * na]; t_len];
        let mut dvalues = vec![vec![0f32; n]; t_len];
        for t in 0..t_len {
            let c = &batch.caches[t];
            let s = t * n..(t + 1) * n;
            let terms = a2c_loss(
                &c.logits,
                &c.values,
                &batch.actions[s.clone()],
                &returns[s.clone()],
                Some(&advantages[s]),
                weights,
                t_len * n,
                &mut dlogits[t],
                &mut dvalues[t],
            );
            total.total += terms.total;
            total.policy += terms.policy;
            total.value += terms.value;
            total.entropy += terms.entropy;
        }
        if !total.is_finite() {
            return Err(Error::NonFinite { what: "loss".into(), update: self.updates });
        }
        self.grads.fill_zero();
        let mut dh = vec![0f32; n * self.net.arch().hidden];
        for t in (0..t_len).rev() {
            frames_to_input(self.net.arch(), batch.frames_at(t), n, &mut self.input)?;
            self.net.backward_step(&self.input, &mut batch.caches[t], &dlogits[t], &dvalues[t], &mut dh, &mut self.grads);
        }
        let grad_norm = clip_global_norm(&mut self.grads, self.hyper.grad_clip);
        if !grad_norm.is_finite() {
            return Err(Error::NonFinite { what: "gradient".into(), update: self.updates });
        }
        let before = self.net.params.clone();
        self.opt.step(&mut self.net.params, &self.grads);
        if !self.net.params.all_finite() {
            self.net.params = before;
            return Err(Error::NonFinite { what: "parameters".into(), update: self.updates });
        }
        self.updates += 1;
        Ok(UpdateStats { loss: total, grad_norm })
    }
}

/// One metrics record per rollout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub update: u64,
    pub frames: u64,
    pub episodes: usize,
    /// Mean return of episodes that ended during this rollout.
    pub mean_return: Option<f64>,
    pub success_rate: Option<f64>,
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub grad_norm: f64,
    pub frames_per_sec: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub arch: Arch,
    pub workers: usize,
    /// Where `checkpoint_latest.bin` (and the final checkpoint) are written.
    pub checkpoint_dir: Option<PathBuf>,
    /// Updates between periodic checkpoints; 0 disables them.
    pub checkpoint_every: u64,
    /// Append-only JSON-lines metrics file.
    pub metrics_path: Option<PathBuf>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { arch: Arch::standard(), workers: 1, checkpoint_dir: None, checkpoint_every: 50, metrics_path: None }
    }
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub metrics: Vec<UpdateMetrics>,
}

pub const LATEST_CHECKPOINT: &str = "checkpoint_latest.bin";
pub const FINAL_CHECKPOINT: &str = "checkpoint_final.bin";

/// Trains on the train split of `set` until `hyper.frame_budget` frames have
/// been consumed. Parameters are seeded by `derive_seed(run_seed, &[0])`;
/// environments by `derive_seed(run_seed, &[1])`; action sampling for slot
/// `i` by `derive_seed(run_seed, &[2, i])`.
///
/// `on_update` sees each metrics record and the updated network; an error
/// from it stops training. If an update produces non-finite values, the last
/// good parameters are checkpointed (when a directory is set) and the error
/// is returned.
pub fn train(
    set: &ConfigSet,
    hyper: &HyperParams,
    run_seed: u64,
    opts: &TrainOptions,
    mut on_update: impl FnMut(&UpdateMetrics, &Net<f32>) -> Result<()>,
) -> Result<TrainOutcome> {
    hyper.validate()?;
    opts.arch.validate()?;
    if opts.arch.input_len() != FRAME_LEN {
        return Err(Error::InvalidArgument("architecture input does not match the observation size".into()));
    }
    let configs = set.split(Split::Train);
    let mut learner = Learner::new(opts.arch.clone(), Params::init(&opts.arch, derive_seed(run_seed, &[0])), hyper.clone())?;
    let mut venv = VecEnv::new(configs, hyper.num_envs, hyper.frame_skip, opts.workers, derive_seed(run_seed, &[1]))?;
    let mut rngs: Vec<Rng> = (0..hyper.num_envs).map(|i| Rng::derive(run_seed, &[2, i as u64])).collect();
    let mut metrics_out = match &opts.metrics_path {
        Some(p) => Some(std::io::BufWriter::new(std::fs::OpenOptions::new().create(true).append(true).open(p)?)),
        None => None,
    };
    if let Some(dir) = &opts.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    let snapshot = |learner: &Learner, frames: u64| Checkpoint {
        arch: opts.arch.clone(),
        hyper: hyper.clone(),
        meta: CheckpointMeta { updates: learner.updates(), frames, run_seed },
        params: learner.net.params.clone(),
    };
    let save = |ck: &Checkpoint, name: &str| -> Result<()> {
        if let Some(dir) = &opts.checkpoint_dir {
            ck.save(&dir.join(name))?;
        }
        Ok(())
    };

    let (t_len, n) = (hyper.rollout_len, hyper.num_envs);
    let hid = opts.arch.hidden;
    let na = opts.arch.actions;
    let mut batch = RolloutBatch::new(t_len, n, FRAME_LEN);
    let mut hidden = vec![0f32; n * hid];
    let mut resets = vec![true; n];
    let mut input = Vec::new();
    let mut scratch = StepCache::default();
    let mut frames = 0u64;
    let mut metrics = Vec::new();
    save(&snapshot(&learner, 0), LATEST_CHECKPOINT)?;

    while frames + hyper.frames_per_update() <= hyper.frame_budget {
        let started = Instant::now();
        let mut returns = Vec::new();
        let mut successes = 0usize;
        for t in 0..t_len {
            let s = t * n..(t + 1) * n;
            batch.frames[t * n * FRAME_LEN..(t + 1) * n * FRAME_LEN].copy_from_slice(venv.obs());
            frames_to_input(&opts.arch, batch.frames_at(t), n, &mut input)?;
            let cache = &mut batch.caches[t];
            learner.net.forward(&input, n, &hidden, &resets, cache)?;
            batch.resets[s.clone()].copy_from_slice(&resets);
            let mut actions = Vec::with_capacity(n);
            for (e, rng) in rngs.iter_mut().enumerate() {
                let a = sample_action(&cache.logits[e * na..(e + 1) * na], rng);
                batch.actions[t * n + e] = a;
                batch.values[t * n + e] = cache.values[e] as f64;
                actions.push(Action::from_index(a)?);
            }
            hidden.copy_from_slice(&cache.hidden);
            let view = venv.step(&actions)?;
            batch.rewards[s.clone()].copy_from_slice(view.rewards);
            batch.dones[s].copy_from_slice(view.dones);
            resets.copy_from_slice(view.dones);
            for info in view.infos.iter().flatten() {
                returns.push(info.episode_return);
                successes += info.success as usize;
            }
        }
        frames_to_input(&opts.arch, venv.obs(), n, &mut input)?;
        learner.net.forward(&input, n, &hidden, &resets, &mut scratch)?;
        for (b, v) in batch.bootstrap.iter_mut().zip(&scratch.values) {
            *b = *v as f64;
        }

        let stats = match learner.update(&mut batch) {
            Ok(s) => s,
            Err(e @ Error::NonFinite { .. }) => {
                save(&snapshot(&learner, frames), LATEST_CHECKPOINT)?;
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        frames += hyper.frames_per_update();
        let episodes = returns.len();
        let m = UpdateMetrics {
            update: learner.updates(),
            frames,
            episodes,
            mean_return: (episodes > 0).then(|| returns.iter().sum::<f64>() / episodes as f64),
            success_rate: (episodes > 0).then(|| successes as f64 / episodes as f64),
            loss: stats.loss.total,
            policy_loss: stats.loss.policy,
            value_loss: stats.loss.value,
            entropy: stats.loss.entropy,
            grad_norm: stats.grad_norm,
            frames_per_sec: hyper.frames_per_update() as f64 / started.elapsed().as_secs_f64().max(1e-9),
        };
        if let Some(out) = metrics_out.as_mut() {
            serde_json::to_writer(&mut *out, &m)?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
        on_update(&m, &learner.net)?;
        metrics.push(m);
        if opts.checkpoint_every > 0 && learner.updates() % opts.checkpoint_every == 0 {
            save(&snapshot(&learner, frames), LATEST_CHECKPOINT)?;
        }
    }
    let checkpoint = snapshot(&learner, frames);
    save(&checkpoint, LATEST_CHECKPOINT)?;
    save(&checkpoint, FINAL_CHECKPOINT)?;
    Ok(TrainOutcome { checkpoint, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperparameter_validation() {
        assert!(HyperParams::default().validate().is_ok());
        for hp in [
            HyperParams { gamma: 0.0, ..Default::default() },
            HyperParams { gamma: 1.5, ..Default::default() },
            HyperParams { entropy_coef: -0.1, ..Default::default() },
            HyperParams { rollout_len: 0, ..Default::default() },
            HyperParams { num_envs: 0, ..Default::default() },
        ] {
            assert!(hp.validate().is_err());
        }
        assert_eq!(HyperParams::default().frames_per_update(), 128 * 16 * 4);
    }

    #[test]
    fn returns_are_bootstrapped_per_slot() {
        let mut b = RolloutBatch::new(2, 2, 1);
        b.rewards = vec![0.0, 1.0, 1.0, 0.0];
        b.dones = vec![false, true, false, false];
        b.bootstrap = vec![10.0, 2.0];
        let r = b.returns(0.5);
        // slot 0: R1 = 1 + 0.5*10 = 6, R0 = 0 + 0.5*6 = 3
        // slot 1: R1 = 0 + 0.5*2 = 1, R0 = 1 (done)
        assert_eq!(r, vec![3.0, 1.0, 6.0, 1.0]);
    }
}
