//! With true labels, CCA on within-cluster permuted pairs recovers the LDA
//! subspace of each view. Prints the principal cosines between the two.

use coper::cca::fit_cca;
use coper::datagen::{synth_multiview, LatentSpec, RandomSpec};
use coper::experiment::lda_alignment;
use coper::lda::fit_lda;

fn main() -> coper::Result<()> {
    let spec = RandomSpec {
        noise: 0.1,
        ..RandomSpec::default()
    };
    let ds = synth_multiview(&LatentSpec::random(&spec, 0)?, 5000, 0)?;
    let labels = ds.labels.clone().expect("synthetic data is labelled");

    let plain = fit_cca(&ds.views[0], &ds.views[1], 2, 1e-4)?;
    let lda = fit_lda(&ds.views[0], &labels, 1e-4)?;
    println!("plain CCA correlations {:.4?}", plain.correlations);
    println!("LDA eigenvalues        {:.4?}", &lda.eigvals[..2]);

    for rounds in [0, 1, 2, 4, 8] {
        let cosines = lda_alignment(&ds, &labels, rounds, 1e-4, 0)?;
        println!("{rounds} rounds: principal cosines {cosines:.4?}");
    }
    Ok(())
}
