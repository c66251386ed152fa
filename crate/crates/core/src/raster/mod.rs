//! Image container, region cropping and the down/up-sampling pipeline that
//! emulates a low-dpi scan at base resolution.

mod io;
mod region;
mod resample;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{encode_png, load_gray, save_png, RegionEntry, SegmentationMap};
pub use region::{crop_region, RegionClass, RegionShape, RegionSpec};
pub use resample::{downsample_box, emulate_dpi, upsample_nearest, EmulatedPair};

/// One of the canonical scan resolutions. 300 dpi is the base resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum DpiLevel {
    D100,
    D150,
    D200,
    D300,
}

impl DpiLevel {
    pub const BASE: DpiLevel = DpiLevel::D300;
    /// All levels, lowest first.
    pub const ASCENDING: [DpiLevel; 4] = [DpiLevel::D100, DpiLevel::D150, DpiLevel::D200, DpiLevel::D300];

    pub fn value(self) -> u32 {
        match self {
            DpiLevel::D100 => 100,
            DpiLevel::D150 => 150,
            DpiLevel::D200 => 200,
            DpiLevel::D300 => 300,
        }
    }

    pub fn from_value(dpi: u32) -> Result<Self> {
        match dpi {
            100 => Ok(DpiLevel::D100),
            150 => Ok(DpiLevel::D150),
            200 => Ok(DpiLevel::D200),
            300 => Ok(DpiLevel::D300),
            other => Err(Error::UnsupportedDpi(other)),
        }
    }
}

impl TryFrom<u32> for DpiLevel {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        DpiLevel::from_value(v)
    }
}

impl From<DpiLevel> for u32 {
    fn from(d: DpiLevel) -> u32 {
        d.value()
    }
}

impl fmt::Display for DpiLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl std::str::FromStr for DpiLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let v: u32 = s
            .trim()
            .parse()
            .map_err(|_| Error::ParseError(format!("not a dpi value: {s:?}")))?;
        DpiLevel::from_value(v)
    }
}

/// 8-bit luminance raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    dpi: DpiLevel,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, dpi: DpiLevel, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty image {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            dpi,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, dpi: DpiLevel, value: u8) -> Result<Self> {
        GrayImage::new(width, height, dpi, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        dpi: DpiLevel,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        GrayImage::new(width, height, dpi, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dpi(&self) -> DpiLevel {
        self.dpi
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn with_dpi(mut self, dpi: DpiLevel) -> Self {
        self.dpi = dpi;
        self
    }

    pub fn same_dims(&self, other: &GrayImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().map(|&p| f64::from(p)).sum::<f64>() / self.pixels.len() as f64
    }
}

/// Converts an interleaved 8-bit RGB raster to luma with BT.601 weights.
pub fn to_grayscale(width: usize, height: usize, rgb: &[u8], dpi: DpiLevel) -> Result<GrayImage> {
    if width == 0 || height == 0 || rgb.is_empty() {
        return Err(Error::InvalidImage("empty RGB image".into()));
    }
    if rgb.len() != width * height * 3 {
        return Err(Error::InvalidImage(format!(
            "{} RGB bytes for a {width}x{height} image",
            rgb.len()
        )));
    }
    let pixels = rgb
        .chunks_exact(3)
        .map(|c| {
            let luma = 0.299 * f64::from(c[0]) + 0.587 * f64::from(c[1]) + 0.114 * f64::from(c[2]);
            luma.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(width, height, dpi, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn luma_of(rgb: [u8; 3]) -> u8 {
        to_grayscale(1, 1, &rgb, DpiLevel::D300).unwrap().get(0, 0)
    }

    #[test]
    fn grayscale_reference_colors() {
        assert_eq!(luma_of([255, 255, 255]), 255);
        assert_eq!(luma_of([0, 0, 0]), 0);
        assert_eq!(luma_of([255, 0, 0]), 76);
        assert_eq!(luma_of([0, 255, 0]), 150);
        assert_eq!(luma_of([0, 0, 255]), 29);
    }

    #[test]
    fn grayscale_rejects_empty() {
        assert!(matches!(
            to_grayscale(0, 0, &[], DpiLevel::D300),
            Err(Error::InvalidImage(_))
        ));
        assert!(matches!(
            to_grayscale(2, 1, &[1, 2, 3], DpiLevel::D300),
            Err(Error::InvalidImage(_))
        ));
    }

    #[test]
    fn image_invariants() {
        assert!(GrayImage::new(2, 2, DpiLevel::D300, vec![0; 3]).is_err());
        assert!(GrayImage::new(0, 2, DpiLevel::D300, vec![]).is_err());
        let img = GrayImage::from_fn(3, 2, DpiLevel::D200, |x, y| (x + 10 * y) as u8).unwrap();
        assert_eq!(img.get(2, 1), 12);
        assert_eq!(img.dpi(), DpiLevel::D200);
    }

    #[test]
    fn dpi_levels() {
        assert_eq!(DpiLevel::from_value(150).unwrap(), DpiLevel::D150);
        assert!(matches!(DpiLevel::from_value(600), Err(Error::UnsupportedDpi(600))));
        assert_eq!("200".parse::<DpiLevel>().unwrap().value(), 200);
        let json = serde_json::to_string(&DpiLevel::D100).unwrap();
        assert_eq!(json, "100");
        assert!(serde_json::from_str::<DpiLevel>("120").is_err());
    }
}
