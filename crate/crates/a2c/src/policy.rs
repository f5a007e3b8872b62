//! Acting with a trained network (or uniformly at random) and batched
//! evaluation episodes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use raymaze_core::rng::{derive_seed, Rng};
use raymaze_core::{Action, Env, EpisodeInfo, ScenarioConfig};

use crate::arch::Arch;
use crate::error::Result;
use crate::loss::log_softmax;
use crate::net::{frames_to_input, Net, StepCache};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionMode {
    Greedy,
    Sampled,
}

/// Draws an action index from `softmax(logits)` using one uniform variate.
pub fn sample_action(logits: &[f32], rng: &mut Rng) -> usize {
    let z: Vec<f64> = logits.iter().map(|&v| v as f64).collect();
    let mut lp = vec![0.0; z.len()];
    log_softmax(&z, &mut lp);
    let u = rng.unit_f64();
    let mut acc = 0.0;
    for (i, l) in lp.iter().enumerate() {
        acc += l.exp();
        if u < acc {
            return i;
        }
    }
    lp.len() - 1
}

/// Index of the largest logit; ties go to the lowest index.
pub fn greedy_action(logits: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Recurrent policy state for a fixed batch of slots.
pub struct Agent {
    net: Net<f32>,
    batch: usize,
    hidden: Vec<f32>,
    reset: Vec<bool>,
    cache: StepCache<f32>,
    input: Vec<f32>,
}

impl Agent {
    pub fn new(net: Net<f32>, batch: usize) -> Self {
        let hidden = vec![0.0; batch * net.arch().hidden];
        Agent { net, batch, hidden, reset: vec![true; batch], cache: StepCache::default(), input: Vec::new() }
    }

    pub fn arch(&self) -> &Arch {
        self.net.arch()
    }

    pub fn net(&self) -> &Net<f32> {
        &self.net
    }

    /// Zeroes the recurrent state of `slot` before its next step.
    pub fn reset_slot(&mut self, slot: usize) {
        self.reset[slot] = true;
    }

    /// Runs one forward step on `batch` frames; returns the cache holding
    /// logits, values and the new hidden state.
    pub fn step(&mut self, frames: &[u8]) -> Result<&StepCache<f32>> {
        frames_to_input(self.net.arch(), frames, self.batch, &mut self.input)?;
        self.net.forward(&self.input, self.batch, &self.hidden, &self.reset, &mut self.cache)?;
        self.hidden.copy_from_slice(&self.cache.hidden);
        self.reset.fill(false);
        Ok(&self.cache)
    }

    pub fn hidden(&self) -> &[f32] {
        &self.hidden
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Drops slot `slot`; later slots shift down by one.
    pub fn remove_slot(&mut self, slot: usize) {
        let h = self.net.arch().hidden;
        self.hidden.drain(slot * h..(slot + 1) * h);
        self.reset.remove(slot);
        self.batch -= 1;
    }
}

/// Network policy or the uniform random baseline.
pub enum Policy {
    Net { net: Net<f32>, mode: ActionMode },
    Random,
}

/// One evaluation episode: configuration `config_index` from `configs`,
/// played with episode seed `seed`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeJob {
    pub config_index: usize,
    pub seed: u64,
}

/// Plays every job to termination, `batch` episodes at a time, and returns
/// their summaries in job order. Action sampling for a job draws from
/// `derive_seed(job.seed, &[1])`, so results do not depend on `batch`.
pub fn run_episodes(
    policy: Policy,
    configs: &[Arc<ScenarioConfig>],
    jobs: &[EpisodeJob],
    frame_skip: u32,
    batch: usize,
) -> Result<Vec<EpisodeInfo>> {
    let mut results: Vec<Option<EpisodeInfo>> = vec![None; jobs.len()];
    if jobs.is_empty() {
        return Ok(Vec::new());
    }
    let batch = batch.clamp(1, jobs.len());
    let (mode, mut agent) = match policy {
        Policy::Net { net, mode } => (Some(mode), Some(Agent::new(net, batch))),
        Policy::Random => (None, None),
    };
    struct Slot {
        job: usize,
        env: Env,
        rng: Rng,
    }
    let start = |job: usize| -> Slot {
        let j = jobs[job];
        Slot {
            job,
            env: Env::new(configs[j.config_index].clone(), j.seed, frame_skip),
            rng: Rng::new(derive_seed(j.seed, &[1])),
        }
    };
    // Finished slots with no job left are removed so the tail of a long
    // evaluation does not pay for a full batch.
    let mut slots: Vec<Slot> = (0..batch).map(start).collect();
    let mut next_job = batch;
    let frame_len = raymaze_core::FRAME_LEN;
    let mut frames = vec![0u8; batch * frame_len];
    let mut actions = vec![0usize; batch];
    while !slots.is_empty() {
        let live = slots.len();
        if let Some(agent) = agent.as_mut() {
            for (s, frame) in slots.iter().zip(frames.chunks_exact_mut(frame_len)) {
                s.env.render_into(frame);
            }
            let na = agent.arch().actions;
            let cache = agent.step(&frames[..live * frame_len])?;
            for (i, s) in slots.iter_mut().enumerate() {
                let logits = &cache.logits[i * na..(i + 1) * na];
                actions[i] = match mode {
                    Some(ActionMode::Greedy) => greedy_action(logits),
                    _ => sample_action(logits, &mut s.rng),
                };
            }
        } else {
            for (i, s) in slots.iter_mut().enumerate() {
                actions[i] = s.rng.index(Action::COUNT);
            }
        }
        let mut i = 0;
        let mut a = 0;
        while i < slots.len() {
            let s = &mut slots[i];
            let tr = s.env.step(Action::from_index(actions[a])?)?;
            a += 1;
            if tr.done {
                results[s.job] = Some(EpisodeInfo::from_state(jobs[s.job].config_index, s.env.state()));
                if next_job < jobs.len() {
                    *s = start(next_job);
                    next_job += 1;
                    if let Some(agent) = agent.as_mut() {
                        agent.reset_slot(i);
                    }
                } else {
                    slots.remove(i);
                    if let Some(agent) = agent.as_mut() {
                        agent.remove_slot(i);
                    }
                    continue;
                }
            }
            i += 1;
        }
    }
    Ok(results.into_iter().map(|r| r.expect("every job finishes")).collect())
}
