//! Command-line interface.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use raymaze_a2c::checkpoint::Checkpoint;
use raymaze_a2c::optim::OptimizerKind;
use raymaze_a2c::policy::ActionMode;
use raymaze_a2c::trainer::{train, HyperParams, TrainOptions, FINAL_CHECKPOINT};
use raymaze_a2c::{Arch, Net};
use raymaze_core::render::write_ppm;
use raymaze_core::{build_config_set, ConfigSet, Env, ScenarioKind, Split};

use crate::error::{CliError, CliResult};
use crate::eval::{evaluate, EvalOptions, EvalPolicy};
use crate::frames::write_frame_png;
use crate::sweep::{run_sweep, SweepOptions};
use crate::throughput::{run_bench, BenchOptions};
use crate::trace::{trace_episode, write_trace, TraceOptions};

#[derive(Parser, Debug)]
#[command(name = "raymaze", version, about = "First-person maze benchmark: environments, A2C training and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a train/test configuration set.
    GenConfigs(GenConfigsArgs),
    /// Measure environment throughput with random actions.
    Bench(BenchArgs),
    /// Train an A2C agent on the train split of a configuration set.
    Train(TrainArgs),
    /// Evaluate a checkpoint (or the random policy) on one split.
    Eval(EvalArgs),
    /// Train on nested training-set sizes and emit train/test curves.
    Sweep(SweepArgs),
    /// Record the recurrent state along one episode.
    Trace(TraceArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ImageFormat {
    Png,
    Ppm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Args, Debug)]
pub struct GenConfigsArgs {
    /// labyrinth, find-and-return, ordered-k-item:K or two-color:C
    #[arg(long, default_value = "labyrinth")]
    pub kind: String,
    /// Maze side length in cells.
    #[arg(long, default_value_t = 7)]
    pub n: usize,
    #[arg(long, default_value_t = 16)]
    pub train: usize,
    #[arg(long, default_value_t = 64)]
    pub test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the spawn view of every configuration into this directory.
    #[arg(long)]
    pub preview: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "png")]
    pub format: ImageFormat,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value = "labyrinth")]
    pub kind: String,
    #[arg(long, default_value_t = 7)]
    pub n: usize,
    #[arg(long, default_value_t = 16)]
    pub num_envs: usize,
    /// Worker threads stepping the environments.
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
    #[arg(long, default_value_t = 5.0)]
    pub seconds: f64,
    #[arg(long, default_value_t = 4)]
    pub frame_skip: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct HyperArgs {
    #[arg(long, default_value_t = 0.99)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub value_coef: f64,
    #[arg(long, default_value_t = 0.01)]
    pub entropy_coef: f64,
    #[arg(long, default_value_t = 7e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 128)]
    pub rollout_len: usize,
    #[arg(long, default_value_t = 16)]
    pub num_envs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub grad_clip: f64,
    #[arg(long, default_value = "rmsprop")]
    pub optimizer: String,
    #[arg(long, default_value_t = 4)]
    pub frame_skip: u32,
}

impl HyperArgs {
    fn to_hyper(&self, frames: u64) -> CliResult<HyperParams> {
        let optimizer = match self.optimizer.as_str() {
            "rmsprop" => OptimizerKind::Rmsprop,
            "sgd" => OptimizerKind::Sgd,
            other => return Err(CliError::Config(format!("unknown optimizer {other:?}"))),
        };
        let hp = HyperParams {
            gamma: self.gamma,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
            learning_rate: self.lr,
            rollout_len: self.rollout_len,
            num_envs: self.num_envs,
            frame_budget: frames,
            grad_clip: self.grad_clip,
            optimizer,
            frame_skip: self.frame_skip,
        };
        hp.validate()?;
        Ok(hp)
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Configuration set written by `gen-configs`.
    #[arg(long)]
    pub configs: PathBuf,
    /// Receives metrics.jsonl and checkpoints.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Frame budget, counting skipped frames.
    #[arg(long, default_value_t = 2_000_000)]
    pub frames: u64,
    #[arg(long, default_value_t = 0)]
    pub run_seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Updates between checkpoints (0: only initial and final).
    #[arg(long, default_value_t = 50)]
    pub checkpoint_every: u64,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, required_unless_present = "random")]
    pub checkpoint: Option<PathBuf>,
    /// Evaluate the uniform random policy instead of a checkpoint.
    #[arg(long, conflicts_with = "checkpoint")]
    pub random: bool,
    #[arg(long)]
    pub configs: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Episodes per configuration and seed.
    #[arg(long, default_value_t = 10)]
    pub episodes: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub seeds: Vec<u64>,
    /// Take the most likely action instead of sampling.
    #[arg(long)]
    pub greedy: bool,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 4)]
    pub frame_skip: u32,
    /// Per-episode JSON-lines records.
    #[arg(long)]
    pub episodes_out: Option<PathBuf>,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, default_value = "labyrinth")]
    pub kind: String,
    #[arg(long, default_value_t = 7)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_value = "16,64,256,1024")]
    pub sizes: Vec<usize>,
    /// Frame budget per training run.
    #[arg(long, default_value_t = 2_000_000)]
    pub frames: u64,
    #[arg(long, default_value_t = 50)]
    pub eval_every: u64,
    #[arg(long, default_value_t = 1)]
    pub eval_episodes: usize,
    #[arg(long, default_value_t = 64)]
    pub test_configs: usize,
    #[arg(long, default_value_t = 0)]
    pub master_seed: u64,
    #[arg(long, default_value_t = 0)]
    pub run_seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// JSON-lines curve output.
    #[arg(long)]
    pub out: PathBuf,
    /// Saves each run's final parameters as `size_<S>.bin`.
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Args, Debug)]
pub struct TraceArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub configs: PathBuf,
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitArg,
    #[arg(long, default_value_t = 0)]
    pub config_index: usize,
    #[arg(long, default_value_t = 0)]
    pub episode_seed: u64,
    /// Maximum decision steps to record.
    #[arg(long, default_value_t = 2100)]
    pub steps: usize,
    #[arg(long)]
    pub greedy: bool,
    #[arg(long, default_value_t = 4)]
    pub frame_skip: u32,
    /// Receives trace.jsonl, hidden.bin and thumbs/.
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn parse_kind(s: &str) -> CliResult<ScenarioKind> {
    ScenarioKind::parse(s).map_err(|e| CliError::Config(e.to_string()))
}

fn load_configs(path: &Path) -> CliResult<ConfigSet> {
    ConfigSet::load(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn load_net(path: &Path) -> CliResult<Net<f32>> {
    let ck = Checkpoint::load(path, Some(&Arch::standard()))?;
    Ok(Net::new(ck.arch, ck.params)?)
}

fn print_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    writeln!(std::io::stdout(), "{text}")?;
    if let Some(p) = out {
        std::fs::write(p, format!("{text}\n"))?;
    }
    Ok(())
}

fn write_jsonl<T: serde::Serialize>(items: &[T], path: &Path) -> CliResult<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn gen_configs(a: GenConfigsArgs) -> CliResult<()> {
    let kind = parse_kind(&a.kind)?;
    let set = build_config_set(kind, a.n, a.train, a.test, a.seed)?;
    set.save(&a.out)?;
    if let Some(dir) = &a.preview {
        std::fs::create_dir_all(dir)?;
        for split in [Split::Train, Split::Test] {
            for (i, cfg) in set.split(split).iter().enumerate() {
                let frame = Env::new(Arc::new(cfg.clone()), 0, 1).render();
                let name = format!("{}_{i:04}", if split == Split::Train { "train" } else { "test" });
                match a.format {
                    ImageFormat::Png => write_frame_png(&frame, &dir.join(format!("{name}.png")))?,
                    ImageFormat::Ppm => write_ppm(&frame, &dir.join(format!("{name}.ppm")))?,
                }
            }
        }
    }
    eprintln!(
        "wrote {} train and {} test {} configurations (n={}) to {}",
        set.train.len(),
        set.test.len(),
        kind,
        a.n,
        a.out.display()
    );
    Ok(())
}

fn bench(a: BenchArgs) -> CliResult<()> {
    if !(a.seconds >= 0.0 && a.seconds.is_finite()) {
        return Err(CliError::Config("seconds must be a non-negative number".into()));
    }
    let report = run_bench(&BenchOptions {
        kind: parse_kind(&a.kind)?,
        n: a.n,
        num_envs: a.num_envs,
        workers: a.workers,
        frame_skip: a.frame_skip,
        duration: Duration::from_secs_f64(a.seconds),
        seed: a.seed,
        ..Default::default()
    })?;
    print_json(&report, a.out.as_deref())
}

fn train_cmd(a: TrainArgs) -> CliResult<()> {
    let set = load_configs(&a.configs)?;
    let hyper = a.hyper.to_hyper(a.frames)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let opts = TrainOptions {
        arch: Arch::standard(),
        workers: a.workers,
        checkpoint_dir: Some(a.out_dir.clone()),
        checkpoint_every: a.checkpoint_every,
        metrics_path: Some(a.out_dir.join("metrics.jsonl")),
    };
    let outcome = train(&set, &hyper, a.run_seed, &opts, |m, _| {
        eprintln!(
            "update {:>5} frames {:>9} return {} success {} loss {:.4} entropy {:.3} fps {:.0}",
            m.update,
            m.frames,
            m.mean_return.map_or("-".into(), |v| format!("{v:.3}")),
            m.success_rate.map_or("-".into(), |v| format!("{v:.2}")),
            m.loss,
            m.entropy,
            m.frames_per_sec
        );
        Ok(())
    })?;
    eprintln!(
        "finished {} updates, {} frames; final checkpoint {}",
        outcome.checkpoint.meta.updates,
        outcome.checkpoint.meta.frames,
        a.out_dir.join(FINAL_CHECKPOINT).display()
    );
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> CliResult<()> {
    let set = load_configs(&a.configs)?;
    let policy = match &a.checkpoint {
        Some(p) if !a.random => EvalPolicy::Net {
            net: load_net(p)?,
            mode: if a.greedy { ActionMode::Greedy } else { ActionMode::Sampled },
        },
        _ => EvalPolicy::Random,
    };
    let opts = EvalOptions {
        split: a.split.into(),
        episodes_per_config: a.episodes,
        seeds: a.seeds.clone(),
        frame_skip: a.frame_skip,
        batch: a.batch,
    };
    let (report, records) = evaluate(&set, &policy, &opts)?;
    if let Some(p) = &a.episodes_out {
        write_jsonl(&records, p)?;
    }
    print_json(&report, a.out.as_deref())
}

fn sweep_cmd(a: SweepArgs) -> CliResult<()> {
    let opts = SweepOptions {
        kind: parse_kind(&a.kind)?,
        n: a.n,
        sizes: a.sizes.clone(),
        master_seed: a.master_seed,
        run_seed: a.run_seed,
        hyper: a.hyper.to_hyper(a.frames)?,
        workers: a.workers,
        eval_every: a.eval_every,
        eval_episodes_per_config: a.eval_episodes,
        test_configs: a.test_configs,
        ..Default::default()
    };
    if let Some(dir) = &a.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(&a.out)?);
    let runs = run_sweep(&opts, |p| {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
        out.flush()?;
        eprintln!(
            "size {:>5} update {:>5} {:?} success {:.3} return {:.3}",
            p.train_size, p.update, p.split, p.success_rate, p.mean_return
        );
        Ok(())
    })?;
    if let Some(dir) = &a.checkpoint_dir {
        for run in &runs {
            run.checkpoint.save(&dir.join(format!("size_{}.bin", run.train_size)))?;
        }
    }
    Ok(())
}

fn trace_cmd(a: TraceArgs) -> CliResult<()> {
    let net = load_net(&a.checkpoint)?;
    let set = load_configs(&a.configs)?;
    let configs = set.split(a.split.into());
    let cfg = configs
        .get(a.config_index)
        .ok_or_else(|| CliError::Config(format!("config index {} out of range ({})", a.config_index, configs.len())))?;
    let opts = TraceOptions {
        max_steps: a.steps,
        frame_skip: a.frame_skip,
        mode: if a.greedy { ActionMode::Greedy } else { ActionMode::Sampled },
        ..Default::default()
    };
    let trace = trace_episode(&net, Arc::new(cfg.clone()), a.config_index, a.episode_seed, &opts)?;
    write_trace(&trace, &a.out_dir)?;
    print_json(&trace.summary, None)
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::GenConfigs(a) => gen_configs(a),
        Command::Bench(a) => bench(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Trace(a) => trace_cmd(a),
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
