//! LDA eigenvalue drift under noisy labels against the first-order bound.

use coper::datagen::Preset;
use coper::perturb::{bound_check, inject_label_noise};

fn main() -> coper::Result<()> {
    let ds = Preset::SplitDigits.generate(900, 0)?;
    let truth = ds.labels.clone().expect("presets are labelled");
    for noise in [0.0, 0.05, 0.1, 0.2, 0.3] {
        let noisy = inject_label_noise(&truth, noise, 0)?;
        let r = bound_check(&ds.views[0], &truth, &noisy, 1e-4)?;
        println!("noise {noise:.2}: max gap {:.5}  bound {:.5}  satisfied {}", r.max_gap, r.bound, r.bound_satisfied);
    }
    Ok(())
}
