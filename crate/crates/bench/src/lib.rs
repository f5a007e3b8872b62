//! Benchmarking, training, evaluation, generalization sweeps and
//! hidden-state tracing on top of `raymaze-core` and `raymaze-a2c`.

pub mod cli;
pub mod error;
pub mod eval;
pub mod frames;
pub mod sweep;
pub mod throughput;
pub mod trace;

pub use error::{CliError, CliResult};
