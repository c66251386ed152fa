//! Trains the acceptability classifier on a synthetic corpus, saves it as
//! JSON and classifies a few held-back samples with the reloaded model.
//!
//!     cargo run --release --example train_svm

use scanres::corpus::{build_samples, synth_corpus, AugmentationPlan, BinarizeMode, SynthSpec};
use scanres::learn::{fit_model, SvmModel, TrainConfig};

fn main() -> scanres::Result<()> {
    let corpus = synth_corpus(&SynthSpec::new(30, 4))?;
    let data = build_samples(&corpus.region_images(), &corpus.labels(BinarizeMode::Standard), &AugmentationPlan::default())?;
    let (held, train) = data.samples.split_at(12);
    let rows: Vec<&[f64]> = train.iter().map(|s| s.features.as_slice()).collect();
    let labels: Vec<_> = train.iter().map(|s| s.label).collect();
    let model = fit_model(&rows, &labels, &TrainConfig::default())?;
    println!("{} support vectors, gamma {:?}", model.support_vectors.len(), model.gamma);

    let path = std::env::temp_dir().join("scanres-example-model.json");
    model.save(&path)?;
    let model = SvmModel::load(&path)?;
    println!("saved and reloaded {}", path.display());
    for s in held {
        let (label, score) = model.predict(&s.features)?;
        println!("{:<8} {:>3} dpi  truth {:<12} predicted {:<12} ({score:+.3})", s.region_id, s.dpi, s.label.name(), label.name());
    }
    Ok(())
}
