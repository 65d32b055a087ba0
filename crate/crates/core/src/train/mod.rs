//! Desk-scale spectrum-matching training: a linear patch autoencoder fitted
//! by plain gradient descent on synthetic power-law fields.

mod jensen;
mod loss;
mod model;
mod trainer;

pub use jensen::{jensen_check, JensenReport};
pub use loss::{loss_dsm_ae, loss_esm_ae, loss_plain_ae, EsmObjective};
pub use model::{Gradients, LinearAE};
pub use trainer::{train, Objective, TargetMode, Trace, TraceRow, TrainConfig, TrainOutcome};
