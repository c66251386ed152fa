//! Repeated stratified cross-validation with and without noise-augmented
//! training samples. Augmented copies only ever enter training folds.
//!
//!     cargo run --release --example cross_validation [runs]

use scanres::corpus::{build_samples, synth_corpus, AugmentationPlan, BinarizeMode, SynthSpec};
use scanres::eval::cross_validate;
use scanres::learn::TrainConfig;

fn main() -> scanres::Result<()> {
    let runs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let corpus = synth_corpus(&SynthSpec::new(80, 1))?;
    let (regions, labels) = (corpus.region_images(), corpus.labels(BinarizeMode::Standard));
    for (name, plan) in [
        ("rated only", AugmentationPlan::default()),
        ("with 2 gaussian + 2 salt-and-pepper copies", AugmentationPlan::copies(2, 2, 1)),
    ] {
        let data = build_samples(&regions, &labels, &plan)?;
        for c in &data.calibrations {
            println!("calibrated {} at {:.5} (mean ssim {:.3})", c.kind.name(), c.parameter, c.mean_ssim);
        }
        let report = cross_validate(&data.samples, runs, 5, 7, &TrainConfig::default())?;
        println!("== {name}: {} samples\n{}", data.samples.len(), report.table());
    }
    Ok(())
}
