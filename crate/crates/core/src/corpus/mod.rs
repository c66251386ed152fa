//! Dataset assembly: manifests, human ratings, augmentation, the synthetic
//! corpus and feature tables on disk.

mod dataset;
mod manifest;
mod persist;
mod ratings;
mod synth;

pub use dataset::{
    augmentation_seed, build_dataset, build_samples, unacceptable_mean_ssim, AugmentationPlan, Dataset, RegionFailure,
};
pub use manifest::{raster_specs, CorpusManifest, PageEntry, RegionImage, MANIFEST_VERSION};
pub use persist::{FeatureTable, FEATURES_VERSION};
pub use ratings::{
    aggregate_ratings, binarize, load_ratings, ratings_from_jsonl, ratings_to_jsonl, save_ratings, BinarizeMode,
    RatingKey, RatingRecord, Score,
};
pub use synth::{emulation_ssim, generate_texture, synth_corpus, SynthCorpus, SynthRegion, SynthSpec, Texture};
