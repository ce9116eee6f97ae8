//! Generates the three-cluster benchmark and writes it as CSV files.
//!
//! `cargo run --example generate_dataset -- /tmp/three-cluster`

use std::path::PathBuf;

use coper::datagen::{load_manifest, save_dataset, Preset};

fn main() -> coper::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("coper-three-cluster"));
    let ds = Preset::ThreeCluster.generate(600, 7)?;
    let manifest = save_dataset(&ds, &dir, 3)?;

    let (back, meta) = load_manifest(&manifest)?;
    println!("wrote {}", manifest.display());
    println!("{} samples, view dims {:?}, k = {}", back.n_samples(), back.dims(), meta.k);
    println!("cluster sizes {:?}", back.labels.as_ref().map(|l| l.counts()));
    Ok(())
}
