//! k-means on concatenated views, scored with ACC, ARI, NMI and silhouette.

use coper::cluster::{kmeans, KMeansConfig};
use coper::datagen::Preset;
use coper::metrics::evaluate;

fn main() -> coper::Result<()> {
    let ds = Preset::ThreeCluster.generate(600, 1)?;
    let truth = ds.labels.clone().expect("presets are labelled");
    let x = ds.concatenated();

    let km = kmeans(&x.transpose(), &KMeansConfig::new(truth.k(), 1))?;
    let report = evaluate(&km.assignment, &truth, Some(&x))?;
    println!("k-means on raw features (inertia {:.2})", km.inertia);
    println!("acc {:.4}  ari {:.4}  nmi {:.4}  silhouette {:.4}", report.acc, report.ari, report.nmi, report.silhouette.unwrap_or(f64::NAN));
    Ok(())
}
