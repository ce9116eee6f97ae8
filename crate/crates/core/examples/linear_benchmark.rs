//! Raw, PCA, CCA and permuted-CCA embeddings clustered with k-means.

use coper::experiment::{linear_bench, DataSource, LinearConfig, LinearMethod};
use coper::datagen::Preset;

fn main() -> coper::Result<()> {
    let source = DataSource::preset(Preset::SplitDigits);
    let result = linear_bench(&source, &LinearMethod::ALL, &LinearConfig::default(), &[0, 1, 2])?;
    print!("{}", result.to_table());
    Ok(())
}
