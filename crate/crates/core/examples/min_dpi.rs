//! Recommends the lowest acceptable scan resolution for each image region of
//! a page, using a model trained on a synthetic corpus.
//!
//!     cargo run --release --example min_dpi

use scanres::corpus::{build_samples, generate_texture, synth_corpus, AugmentationPlan, BinarizeMode, SynthSpec, Texture};
use scanres::learn::{fit_model, min_acceptable_dpi, TrainConfig};
use scanres::raster::{RegionClass, RegionSpec};
use scanres::{DpiLevel, GrayImage};

fn main() -> scanres::Result<()> {
    let corpus = synth_corpus(&SynthSpec::new(60, 9))?;
    let data = build_samples(&corpus.region_images(), &corpus.labels(BinarizeMode::Standard), &AugmentationPlan::default())?;
    let rows: Vec<&[f64]> = data.samples.iter().map(|s| s.features.as_slice()).collect();
    let labels: Vec<_> = data.samples.iter().map(|s| s.label).collect();
    let model = fit_model(&rows, &labels, &TrainConfig::default())?;

    // A page with one tile of each texture side by side.
    let tiles: Vec<GrayImage> = Texture::ALL.iter().map(|&t| generate_texture(t, 96, 100)).collect();
    let page = GrayImage::from_fn(4 * 104, 104, DpiLevel::D300, |x, y| {
        let (i, lx, ly) = (x / 104, x % 104, y);
        if (4..100).contains(&lx) && (4..100).contains(&ly) {
            tiles[i].get(lx - 4, ly - 4)
        } else {
            255
        }
    })?;
    for (i, t) in Texture::ALL.iter().enumerate() {
        let region = RegionSpec::rect(format!("{t:?}"), RegionClass::RasterImage, i * 104 + 4, 4, 96, 96);
        println!("{:<18} {} dpi", region.id, min_acceptable_dpi(&model, &page, &region)?);
    }
    Ok(())
}
