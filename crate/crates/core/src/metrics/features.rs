use super::{dsa, edge_density, mse_tiles, psd_tiles, tile_size, tile_ssim, Feature, FeatureVector, NUM_FEATURES};
use crate::error::{Error, Result};
use crate::raster::{DpiLevel, EmulatedPair, GrayImage};

/// Assembles the nine features: full-reference ones on `(reference, test)`
/// with base-resolution tiles, edge density on `ed_source` with `ed_tile`.
pub fn feature_vector(reference: &GrayImage, test: &GrayImage, ed_source: &GrayImage, ed_tile: usize) -> Result<FeatureVector> {
    let fr_tile = tile_size(DpiLevel::BASE);
    let mut v = FeatureVector([0.0; NUM_FEATURES]);
    v.set(Feature::Dsa, dsa(reference, test)?);
    let (m, s) = psd_tiles(reference, test, fr_tile)?;
    v.set(Feature::PsdMean, m);
    v.set(Feature::PsdStd, s);
    let (m, s) = edge_density(ed_source, ed_tile)?;
    v.set(Feature::EdMean, m);
    v.set(Feature::EdStd, s);
    let (m, s) = tile_ssim(reference, test, fr_tile)?;
    v.set(Feature::TssimMean, m);
    v.set(Feature::TssimStd, s);
    let (m, s) = mse_tiles(reference, test, fr_tile)?;
    v.set(Feature::MseMean, m);
    v.set(Feature::MseStd, s);
    if !v.is_finite() {
        return Err(Error::InvalidFeature(format!("{v:?}")));
    }
    Ok(v)
}

/// Features of a base-resolution region against its emulation at `dpi`.
pub fn extract_features(reference: &GrayImage, pair: &EmulatedPair, dpi: DpiLevel) -> Result<FeatureVector> {
    if reference.dpi() != DpiLevel::BASE {
        return Err(Error::DpiMismatch {
            expected: DpiLevel::BASE.value(),
            actual: reference.dpi().value(),
        });
    }
    feature_vector(reference, &pair.at_base, &pair.native_lowres, tile_size(dpi))
}

/// Features of a clean region against a noise-degraded copy. Both live at
/// base resolution, so edge density uses the base tile on the noisy image.
pub fn extract_features_augmented(clean: &GrayImage, noisy: &GrayImage) -> Result<FeatureVector> {
    feature_vector(clean, noisy, noisy, tile_size(DpiLevel::BASE))
}
