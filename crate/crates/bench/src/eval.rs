//! Train/test evaluation with mean and spread over independent seeds.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use raymaze_a2c::policy::{run_episodes, ActionMode, EpisodeJob, Policy};
use raymaze_a2c::Net;
use raymaze_core::env::EpisodeInfo;
use raymaze_core::rng::derive_seed;
use raymaze_core::scenario::Termination;
use raymaze_core::{ConfigSet, ScenarioConfig, ScenarioKind, Split};

use crate::error::CliResult;

/// One evaluated episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub config_index: usize,
    pub episode: usize,
    pub episode_return: f64,
    pub length: u32,
    pub success: bool,
    pub termination: Termination,
    pub correct_pickups: u32,
    pub wrong_pickups: u32,
    pub found: bool,
}

impl EpisodeRecord {
    fn new(seed: u64, episode: usize, info: EpisodeInfo) -> Self {
        EpisodeRecord {
            seed,
            config_index: info.config_index,
            episode,
            episode_return: info.episode_return,
            length: info.length,
            success: info.success,
            termination: info.termination,
            correct_pickups: info.correct_pickups,
            wrong_pickups: info.wrong_pickups,
            found: info.found,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation (zero for fewer than two values).
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return MeanStd::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

/// Per-seed aggregates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_return: f64,
    /// Return as a fraction of the maximum task reward (ordered-item tasks).
    pub item_normalized_return: Option<f64>,
    pub mean_duration: f64,
    /// Find-and-return: fraction of episodes that reached the goal.
    pub find_rate: Option<f64>,
}

impl SeedSummary {
    pub fn from_records(kind: ScenarioKind, seed: u64, records: &[EpisodeRecord]) -> Self {
        let n = records.len().max(1) as f64;
        let mean = |f: &dyn Fn(&EpisodeRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
        let mean_return = mean(&|r| r.episode_return);
        SeedSummary {
            seed,
            episodes: records.len(),
            success_rate: mean(&|r| r.success as u8 as f64),
            mean_return,
            item_normalized_return: match kind {
                ScenarioKind::OrderedKItem { .. } => Some(mean_return / kind.max_task_reward()),
                _ => None,
            },
            mean_duration: mean(&|r| r.length as f64),
            find_rate: matches!(kind, ScenarioKind::FindAndReturn).then(|| mean(&|r| r.found as u8 as f64)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: String,
    pub n: usize,
    pub split: Split,
    pub policy: String,
    pub episodes_per_config: usize,
    pub configs: usize,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub success_rate: MeanStd,
    pub mean_return: MeanStd,
    pub item_normalized_return: Option<MeanStd>,
    pub mean_duration: MeanStd,
    pub find_rate: Option<MeanStd>,
    pub per_seed: Vec<SeedSummary>,
}

impl EvalReport {
    /// Aggregates per-episode records (grouped by seed, in `seeds` order).
    pub fn from_records(
        set: &ConfigSet,
        split: Split,
        policy: &str,
        episodes_per_config: usize,
        seeds: &[u64],
        records: &[EpisodeRecord],
    ) -> Self {
        let per_seed: Vec<SeedSummary> = seeds
            .iter()
            .map(|&s| {
                let rs: Vec<EpisodeRecord> = records.iter().filter(|r| r.seed == s).cloned().collect();
                SeedSummary::from_records(set.kind, s, &rs)
            })
            .filter(|s| s.episodes > 0)
            .collect();
        let col = |f: &dyn Fn(&SeedSummary) -> f64| MeanStd::of(&per_seed.iter().map(f).collect::<Vec<_>>());
        let opt_col = |f: &dyn Fn(&SeedSummary) -> Option<f64>| {
            let v: Option<Vec<f64>> = per_seed.iter().map(f).collect();
            v.filter(|v| !v.is_empty()).map(|v| MeanStd::of(&v))
        };
        EvalReport {
            scenario: set.kind.to_string(),
            n: set.n,
            split,
            policy: policy.to_string(),
            episodes_per_config,
            configs: set.split(split).len(),
            episodes: records.len(),
            seeds: seeds.to_vec(),
            success_rate: col(&|s| s.success_rate),
            mean_return: col(&|s| s.mean_return),
            item_normalized_return: opt_col(&|s| s.item_normalized_return),
            mean_duration: col(&|s| s.mean_duration),
            find_rate: opt_col(&|s| s.find_rate),
            per_seed,
        }
    }
}

#[derive(Clone, Debug)]
pub enum EvalPolicy {
    Net { net: Net<f32>, mode: ActionMode },
    Random,
}

impl EvalPolicy {
    pub fn label(&self) -> String {
        match self {
            EvalPolicy::Net { mode: ActionMode::Greedy, .. } => "greedy".into(),
            EvalPolicy::Net { mode: ActionMode::Sampled, .. } => "sampled".into(),
            EvalPolicy::Random => "random".into(),
        }
    }

    fn policy(&self) -> Policy {
        match self {
            EvalPolicy::Net { net, mode } => Policy::Net { net: net.clone(), mode: *mode },
            EvalPolicy::Random => Policy::Random,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub split: Split,
    pub episodes_per_config: usize,
    pub seeds: Vec<u64>,
    pub frame_skip: u32,
    pub batch: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            split: Split::Test,
            episodes_per_config: 10,
            seeds: vec![0, 1, 2],
            frame_skip: raymaze_core::DEFAULT_FRAME_SKIP,
            batch: 32,
        }
    }
}

/// Plays `episodes_per_config` episodes on every configuration of the split
/// for each seed. Episode `e` of configuration `c` under seed `s` uses
/// episode seed `derive_seed(s, &[c, e])`.
pub fn evaluate(set: &ConfigSet, policy: &EvalPolicy, opts: &EvalOptions) -> CliResult<(EvalReport, Vec<EpisodeRecord>)> {
    let configs: Vec<Arc<ScenarioConfig>> = set.split(opts.split).iter().cloned().map(Arc::new).collect();
    let mut records = Vec::new();
    for &seed in &opts.seeds {
        let mut jobs = Vec::new();
        let mut episode_ids = Vec::new();
        for c in 0..configs.len() {
            for e in 0..opts.episodes_per_config {
                jobs.push(EpisodeJob { config_index: c, seed: derive_seed(seed, &[c as u64, e as u64]) });
                episode_ids.push(e);
            }
        }
        let infos = run_episodes(policy.policy(), &configs, &jobs, opts.frame_skip, opts.batch)?;
        records.extend(infos.into_iter().zip(episode_ids).map(|(info, e)| EpisodeRecord::new(seed, e, info)));
    }
    let report = EvalReport::from_records(set, opts.split, &policy.label(), opts.episodes_per_config, &opts.seeds, &records);
    Ok((report, records))
}
