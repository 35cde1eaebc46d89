//! Desk-scale optimization of a toy linear encoder that produces
//! (mean, variance) representations, trained with a listwise distillation
//! loss against teacher rankings.
//!
//! The encoder keeps the production head structure -- a mean projection and
//! a softplus variance projection over input features -- while replacing the
//! language-model backbone with given feature vectors, so the whole pipeline
//! stays gradient-checkable and runs end to end in seconds.

mod driver;
mod encoder;
mod loss;
mod negatives;
mod step;

pub use driver::{run_training, EvalSplit, TrainConfig, TrainData, TrainReport};
pub use encoder::{encode, softplus, softplus_grad, EncoderParams};
pub use loss::{distill_loss, lambda_pairs, loss_from_scores, ranks_from_scores, LambdaPair};
pub use negatives::{refresh_hard_negatives, CandidatePool};
pub use step::{instance_scores, train_step, train_step_with, Candidate, StepOptions, TrainingInstance};
