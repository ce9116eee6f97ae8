//! Plain CCA followed by two pseudo-label re-pairing stages, with the
//! per-stage eigenvalue gap to the true-label limit.

use coper::datagen::Preset;
use coper::experiment::{casestudy, CaseStudyConfig, DataSource, LinearConfig};

fn main() -> coper::Result<()> {
    let source = DataSource::preset(Preset::SplitDigits);
    let report = casestudy(&source, &LinearConfig::default(), &CaseStudyConfig::default(), &[0, 1, 2])?;
    print!("{}", report.result.to_table());
    for row in &report.stages {
        println!(
            "seed {} stage {}: ari {:.4}, eigen gap {:.4}",
            row.seed,
            row.stage,
            row.ari.unwrap_or(f64::NAN),
            row.eigen_gap.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
