//! Pseudo-labels from a CCA embedding: soft k-means, confident selection,
//! per-view refinement and cross-view agreement.

use coper::cca::{fit_cca, transform, Side};
use coper::cluster::{kmeans, KMeansConfig};
use coper::datagen::Preset;
use coper::pseudolabel::{label_precision, permutation_labels, pseudo_label, softmax_distances, ProbabilityMatrix, PseudoLabelConfig};

fn main() -> coper::Result<()> {
    let ds = Preset::SplitDigits.generate(900, 3)?;
    let truth = ds.labels.clone().expect("presets are labelled");
    let k = truth.k();

    let model = fit_cca(&ds.views[0], &ds.views[1], k - 1, 1e-4)?;
    let u = transform(&model, &ds.views[0], Side::First)?;
    let v = transform(&model, &ds.views[1], Side::Second)?;
    let fused = u.add(&v).scale(0.5);

    // Temperature: mean squared distance to the nearest center.
    let km = kmeans(&fused.transpose(), &KMeansConfig::new(k, 3))?;
    let p = ProbabilityMatrix::new(softmax_distances(&fused, &km.centers, km.inertia / ds.n_samples() as f64))?;

    for agreement in [false, true] {
        let config = PseudoLabelConfig {
            top_count: ds.n_samples().div_ceil(k),
            lambda: 0.5,
            agreement,
        };
        let set = pseudo_label(&p, &[&u, &v], &config)?;
        let usable = permutation_labels(&set, &p, agreement).iter().flatten().count();
        println!(
            "agreement {agreement}: {} retained, {usable} usable for permutation, precision {:.3}",
            set.retained.len(),
            label_precision(&set, &truth)?.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
