//! Desk-scale neural variant: MLP encoders trained with the correlation
//! loss, pseudo-label cross-entropy and within-cluster permutations.

pub mod adam;
pub mod loss;
pub mod mlp;
pub mod train;

pub use adam::Adam;
pub use loss::{cross_entropy, fuse, fuse_backward, mse, reconstruction_loss, Reconstruction};
pub use mlp::{ForwardCache, Layer, MlpNetwork, Output};
pub use train::{
    objective, prepare_batch, schedule_for, train_coper, tune, Batch, CoperModel, EpochLog, HeadInit, LossBreakdown, LossWeights,
    TrainConfig, TrainOutcome, TrainingLog, TuneReport, TuneRow, Variant,
};
