//! Trains the end-to-end model on the three-cluster benchmark.
//!
//! `cargo run --release --example train_neural -- 200`

use coper::datagen::Preset;
use coper::experiment::benchmark_train_config;
use coper::metrics::evaluate;

fn main() -> coper::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let ds = Preset::ThreeCluster.generate(Preset::ThreeCluster.default_samples(), 0)?;
    let truth = ds.labels.clone().expect("presets are labelled");

    let config = benchmark_train_config().with_epochs(epochs);
    let outcome = coper::neural::train_coper(&ds, &config)?;
    for log in outcome.log.epochs.iter().step_by((epochs / 6).max(1)) {
        println!("epoch {:>4}  loss {:.4}", log.epoch, log.total);
    }
    let report = evaluate(&outcome.assignment, &truth, Some(&outcome.model.fused(&ds)?))?;
    println!("acc {:.4}  ari {:.4}  nmi {:.4}", report.acc, report.ari, report.nmi);
    Ok(())
}
