//! Recurrent advantage actor-critic: a conv + GRU policy/value network with
//! hand-written gradients, n-step returns, RMSprop and a training loop over
//! [`raymaze_core::VecEnv`].

pub mod arch;
pub mod checkpoint;
pub mod error;
pub mod init;
pub mod layers;
pub mod loss;
pub mod net;
pub mod optim;
pub mod policy;
pub mod returns;
pub mod scalar;
pub mod trainer;

pub use arch::{Arch, Params};
pub use checkpoint::{Checkpoint, CheckpointMeta};
pub use error::{Error, Result};
pub use init::orthogonal_init;
pub use loss::{a2c_loss, LossTerms, LossWeights};
pub use net::{frames_to_input, Net, StepCache};
pub use optim::OptimizerKind;
pub use policy::{run_episodes, ActionMode, Agent, EpisodeJob, Policy};
pub use returns::compute_returns;
pub use trainer::{train, HyperParams, Learner, RolloutBatch, TrainOptions, TrainOutcome, UpdateMetrics};
