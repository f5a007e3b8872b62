//! Generalization sweep: train on nested prefixes of one training pool and
//! evaluate every run on the same test split.

use serde::{Deserialize, Serialize};

use raymaze_a2c::policy::ActionMode;
use raymaze_a2c::trainer::{train, HyperParams, TrainOptions};
use raymaze_a2c::{Arch, Checkpoint, Net};
use raymaze_core::rng::derive_seed;
use raymaze_core::{build_config_set, ConfigSet, ScenarioKind, Split};

use crate::error::{CliError, CliResult};
use crate::eval::{evaluate, EvalOptions, EvalPolicy};

pub const DEFAULT_SIZES: [usize; 4] = [16, 64, 256, 1024];
pub const TEST_CONFIGS: usize = 64;

/// One point of a train or test curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub train_size: usize,
    pub update: u64,
    pub frames: u64,
    pub split: Split,
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_return: f64,
}

/// One finished training run of a sweep.
#[derive(Clone, Debug)]
pub struct SweepRun {
    pub train_size: usize,
    pub checkpoint: Checkpoint,
    pub points: Vec<CurvePoint>,
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub kind: ScenarioKind,
    pub n: usize,
    pub sizes: Vec<usize>,
    pub master_seed: u64,
    pub run_seed: u64,
    pub hyper: HyperParams,
    pub arch: Arch,
    pub workers: usize,
    /// Updates between evaluations; 0 evaluates only the final parameters.
    pub eval_every: u64,
    pub eval_episodes_per_config: usize,
    /// Training-split evaluation uses at most this many configurations.
    pub eval_train_configs: usize,
    /// Size of the shared test split.
    pub test_configs: usize,
    pub eval_seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            kind: ScenarioKind::Labyrinth,
            n: 7,
            sizes: DEFAULT_SIZES.to_vec(),
            master_seed: 0,
            run_seed: 0,
            hyper: HyperParams::default(),
            arch: Arch::standard(),
            workers: 1,
            eval_every: 50,
            eval_episodes_per_config: 1,
            eval_train_configs: TEST_CONFIGS,
            test_configs: TEST_CONFIGS,
            eval_seed: 0,
        }
    }
}

/// The training pool holds `max(sizes)` configurations; the run for size `s`
/// uses its first `s`. All runs share the test split.
pub fn sweep_config_set(opts: &SweepOptions) -> CliResult<ConfigSet> {
    let largest = opts.sizes.iter().copied().max().unwrap_or(0);
    let set = build_config_set(opts.kind, opts.n, largest, opts.test_configs, opts.master_seed)?;
    if !set.is_disjoint() {
        return Err(CliError::Config("train and test splits overlap".into()));
    }
    Ok(set)
}

fn evaluate_pair(
    set: &ConfigSet,
    net: &Net<f32>,
    opts: &SweepOptions,
    size: usize,
    update: u64,
    frames: u64,
) -> CliResult<[CurvePoint; 2]> {
    let policy = EvalPolicy::Net { net: net.clone(), mode: ActionMode::Sampled };
    let eval_set = set.with_train_prefix(size.min(opts.eval_train_configs));
    let point = |split: Split| -> CliResult<CurvePoint> {
        let eo = EvalOptions {
            split,
            episodes_per_config: opts.eval_episodes_per_config,
            seeds: vec![opts.eval_seed],
            frame_skip: opts.hyper.frame_skip,
            ..Default::default()
        };
        let (report, _) = evaluate(&eval_set, &policy, &eo)?;
        Ok(CurvePoint {
            train_size: size,
            update,
            frames,
            split,
            episodes: report.episodes,
            success_rate: report.success_rate.mean,
            mean_return: report.mean_return.mean,
        })
    };
    Ok([point(Split::Train)?, point(Split::Test)?])
}

/// Runs one training job per size and passes its paired train/test points
/// to `emit` once the run finishes.
pub fn run_sweep(opts: &SweepOptions, mut emit: impl FnMut(&CurvePoint) -> CliResult<()>) -> CliResult<Vec<SweepRun>> {
    let set = sweep_config_set(opts)?;
    let mut runs = Vec::new();
    for (i, &size) in opts.sizes.iter().enumerate() {
        if size == 0 {
            return Err(CliError::Config("training set size must be at least 1".into()));
        }
        let subset = set.with_train_prefix(size);
        let train_opts = TrainOptions { arch: opts.arch.clone(), workers: opts.workers, ..Default::default() };
        let mut points = Vec::new();
        let mut last_eval = None;
        let mut eval_error = None;
        let outcome = train(&subset, &opts.hyper, derive_seed(opts.run_seed, &[i as u64]), &train_opts, |m, net| {
            if opts.eval_every > 0 && m.update % opts.eval_every == 0 {
                match evaluate_pair(&set, net, opts, size, m.update, m.frames) {
                    Ok(pair) => {
                        points.extend(pair);
                        last_eval = Some(m.update);
                    }
                    Err(e) => {
                        eval_error = Some(e);
                        return Err(raymaze_a2c::Error::InvalidArgument("evaluation failed".into()));
                    }
                }
            }
            Ok(())
        });
        if let Some(e) = eval_error {
            return Err(e);
        }
        let outcome = outcome?;
        let meta = &outcome.checkpoint.meta;
        if last_eval != Some(meta.updates) {
            let net = Net::new(opts.arch.clone(), outcome.checkpoint.params.clone())?;
            points.extend(evaluate_pair(&set, &net, opts, size, meta.updates, meta.frames)?);
        }
        for p in &points {
            emit(p)?;
        }
        runs.push(SweepRun { train_size: size, checkpoint: outcome.checkpoint, points });
    }
    Ok(runs)
}
