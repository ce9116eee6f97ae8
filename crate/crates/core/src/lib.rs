pub mod cca;
pub mod cli;
pub mod cluster;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod lda;
pub mod linalg;
pub mod metrics;
pub mod neural;
pub mod permute;
pub mod perturb;
pub mod pseudolabel;
pub mod rng;

pub use error::{Error, Result};
