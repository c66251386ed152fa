//! Ranks the nine features with sequential floating forward selection.
//!
//!     cargo run --release --example feature_selection

use scanres::corpus::{build_samples, synth_corpus, AugmentationPlan, BinarizeMode, SynthSpec};
use scanres::learn::TrainConfig;
use scanres::metrics::{Feature, NUM_FEATURES};
use scanres::sffs::sffs_select;

fn main() -> scanres::Result<()> {
    let corpus = synth_corpus(&SynthSpec::new(40, 2))?;
    let data = build_samples(&corpus.region_images(), &corpus.labels(BinarizeMode::Standard), &AugmentationPlan::default())?;
    let rows: Vec<&[f64]> = data.samples.iter().map(|s| s.features.as_slice()).collect();
    let labels: Vec<_> = data.samples.iter().map(|s| s.label).collect();
    let r = sffs_select(&rows, &labels, NUM_FEATURES, 0, &TrainConfig::default())?;
    println!("size  accuracy  subset");
    for b in &r.best_by_size {
        let names: Vec<_> = b.subset.iter().map(|&i| Feature::ALL[i].name()).collect();
        println!("{:>4}  {:>8.4}  {}", b.size, b.score, names.join(", "));
    }
    let ranking: Vec<_> = r.ranking.iter().map(|&i| Feature::ALL[i].name()).collect();
    println!("ranking: {}", ranking.join(" > "));
    Ok(())
}
