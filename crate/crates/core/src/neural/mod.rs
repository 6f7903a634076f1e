//! From-scratch sequence regressors for joint-angle decoding.
//!
//! The main model is a recurrent network (dense encoder, two stacked GRUs,
//! dense head) trained with Adam on a Huber loss, mini-batches, global-norm
//! gradient clipping, and early stopping on a validation split. Baselines:
//! an MLP over flattened feature sequences and closed-form ridge
//! regression. All parameters are f64 and all randomness (init, shuffling,
//! dropout) derives from explicit seeds, so training is reproducible
//! bit-for-bit.

mod adam;
pub mod artifact;
mod layers;
mod loss;
mod model;
mod ridge;
mod tdf;
mod train;


pub use adam::Adam;
pub use artifact::{FeaturePipeline, ModelArtifact, ModelKind, PipelineMeta, TrainedModel};
pub use layers::{Activation, Dense, Gru, Layer};
pub use loss::huber_loss;
pub use model::{build_mlp, build_trr, build_trr_sized, NeuralModel, TargetStats, TrrSizes};
pub use ridge::{default_lambda_grid, ridge_fit, RidgeModel};
pub use tdf::{tdf_features, TdfThresholds};
pub use train::{predict, train, CmtsSample, SampleSet, TrainConfig, TrainingLog};
