//! Environment throughput measurement.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use raymaze_core::rng::Rng;
use raymaze_core::{build_config_set, Action, ScenarioKind, VecEnv};

use crate::error::CliResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hardware {
    pub cpu: String,
    pub logical_cores: usize,
    pub os: String,
    pub arch: String,
}

impl Hardware {
    pub fn detect() -> Self {
        let cpu = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| {
                s.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split(':').nth(1))
                    .map(|m| m.trim().to_string())
            })
            .unwrap_or_else(|| "unknown".into());
        Hardware {
            cpu,
            logical_cores: std::thread::available_parallelism().map_or(1, |n| n.get()),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scenario: String,
    pub n: usize,
    pub num_envs: usize,
    pub workers: usize,
    pub frame_skip: u32,
    pub seconds: f64,
    pub decision_steps: u64,
    /// Physics frames, i.e. decision steps times the frame skip.
    pub frames: u64,
    pub frames_per_sec: f64,
    /// Rendered observations (one per decision step).
    pub obs_per_sec: f64,
    pub frames_per_sec_per_core: f64,
    pub obs_per_sec_per_core: f64,
    pub hardware: Hardware,
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub kind: ScenarioKind,
    pub n: usize,
    pub configs: usize,
    pub num_envs: usize,
    pub workers: usize,
    pub frame_skip: u32,
    pub duration: Duration,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            kind: ScenarioKind::Labyrinth,
            n: 7,
            configs: 64,
            num_envs: 16,
            workers: 4,
            frame_skip: raymaze_core::DEFAULT_FRAME_SKIP,
            duration: Duration::from_secs(5),
            seed: 0,
        }
    }
}

/// Steps `num_envs` slots with uniformly random actions for `duration` and
/// reports rates. Zero slots give an all-zero report.
pub fn run_bench(opts: &BenchOptions) -> CliResult<BenchReport> {
    let workers = opts.workers.max(1);
    let mut report = BenchReport {
        scenario: opts.kind.to_string(),
        n: opts.n,
        num_envs: opts.num_envs,
        workers,
        frame_skip: opts.frame_skip,
        seconds: 0.0,
        decision_steps: 0,
        frames: 0,
        frames_per_sec: 0.0,
        obs_per_sec: 0.0,
        frames_per_sec_per_core: 0.0,
        obs_per_sec_per_core: 0.0,
        hardware: Hardware::detect(),
    };
    if opts.num_envs == 0 {
        return Ok(report);
    }
    let set = build_config_set(opts.kind, opts.n, opts.configs.max(1), 0, opts.seed)?;
    let mut venv = VecEnv::new(&set.train, opts.num_envs, opts.frame_skip, workers, opts.seed)?;
    let mut rng = Rng::derive(opts.seed, &[0xbe_c4]);
    let mut actions = vec![Action::Forward; opts.num_envs];
    let start = Instant::now();
    loop {
        for a in actions.iter_mut() {
            *a = Action::ALL[rng.index(Action::COUNT)];
        }
        venv.step(&actions)?;
        if start.elapsed() >= opts.duration {
            break;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let steps = venv.decision_steps();
    report.seconds = secs;
    report.decision_steps = steps;
    report.frames = steps * opts.frame_skip as u64;
    report.obs_per_sec = steps as f64 / secs;
    report.frames_per_sec = report.frames as f64 / secs;
    let cores = workers.min(report.hardware.logical_cores).max(1) as f64;
    report.frames_per_sec_per_core = report.frames_per_sec / cores;
    report.obs_per_sec_per_core = report.obs_per_sec / cores;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_envs_give_empty_report() {
        let r = run_bench(&BenchOptions { num_envs: 0, ..Default::default() }).unwrap();
        assert_eq!(r.frames, 0);
        assert_eq!(r.frames_per_sec, 0.0);
    }

    #[test]
    fn frames_count_skipped_ticks() {
        let r = run_bench(&BenchOptions {
            num_envs: 2,
            workers: 1,
            n: 5,
            configs: 2,
            duration: Duration::from_millis(50),
            ..Default::default()
        })
        .unwrap();
        assert!(r.decision_steps > 0);
        assert_eq!(r.frames, r.decision_steps * 4);
    }
}
