//! Loss, optimizer, metrics, and the held-out training protocol.

mod adam;
mod config;
mod loss;
mod metrics;
mod protocol;
mod report;

pub use adam::Adam;
pub use config::{ExperimentConfig, TrainConfig};
pub use loss::{l2_penalty, loss};
pub use metrics::{metrics, Metrics, NUM_CLASSES};
pub use protocol::{best_epoch, evaluate, fit_two_pass, fit_two_pass_jobs, predict, RunOutcome, Trainer, TwoPassOutcome};
pub use report::{Aggregate, RunReport, TrainReport};
