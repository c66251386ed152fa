use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat};
use serde::{Deserialize, Serialize};

use super::{to_grayscale, DpiLevel, GrayImage, RegionClass, RegionShape, RegionSpec};
use crate::error::{Error, Result};

/// Reads an 8-bit grayscale or RGB PNG / binary PGM. Colour input is reduced
/// to BT.601 luma; alpha is discarded.
pub fn load_gray(path: &Path, dpi: DpiLevel) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoded = image::load_from_memory(&bytes)
        .map_err(|e| Error::InvalidImage(format!("{}: {e}", path.display())))?;
    from_dynamic(decoded, dpi)
}

fn from_dynamic(decoded: DynamicImage, dpi: DpiLevel) -> Result<GrayImage> {
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    match decoded {
        DynamicImage::ImageLuma8(g) => GrayImage::new(w, h, dpi, g.into_raw()),
        DynamicImage::ImageLumaA8(_) => GrayImage::new(w, h, dpi, decoded.to_luma8().into_raw()),
        other => to_grayscale(w, h, other.to_rgb8().as_raw(), dpi),
    }
}

pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.pixels().to_vec())
        .ok_or_else(|| Error::InvalidImage("pixel buffer size".into()))?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::InvalidImage(format!("png encode: {e}")))?;
    Ok(out.into_inner())
}

pub fn save_png(img: &GrayImage, path: &Path) -> Result<()> {
    let bytes = encode_png(img)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// One region of a segmentation document:
/// `{id, class, rect: [x, y, w, h]}` or `{id, class, polygon: [[x, y], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEntry {
    pub id: String,
    pub class: RegionClass,
    #[serde(flatten)]
    pub shape: RegionShape,
}

/// Segmentation map of one page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationMap {
    pub page: String,
    pub dpi: u32,
    pub regions: Vec<RegionEntry>,
}

impl SegmentationMap {
    pub fn from_json(text: &str) -> Result<Self> {
        let map: SegmentationMap =
            serde_json::from_str(text).map_err(|e| Error::ParseError(format!("segmentation: {e}")))?;
        DpiLevel::from_value(map.dpi)?;
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SegmentationMap::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("segmentation map serializes")
    }

    pub fn region_specs(&self) -> Vec<RegionSpec> {
        self.regions
            .iter()
            .map(|r| RegionSpec {
                id: r.id.clone(),
                class: r.class,
                shape: r.shape.clone(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segmentation_json_shapes() {
        let text = r#"{"page": "p1.png", "dpi": 300, "regions": [
            {"id": "a", "class": "raster_image", "rect": [1, 2, 30, 40]},
            {"id": "b", "class": "text", "polygon": [[0, 0], [5, 0], [5, 5.5]]}
        ]}"#;
        let map = SegmentationMap::from_json(text).unwrap();
        let specs = map.region_specs();
        assert_eq!(specs[0], RegionSpec::rect("a", RegionClass::RasterImage, 1, 2, 30, 40));
        assert_eq!(
            specs[1].shape,
            RegionShape::Polygon(vec![[0.0, 0.0], [5.0, 0.0], [5.0, 5.5]])
        );
        let again = SegmentationMap::from_json(&map.to_json()).unwrap();
        assert_eq!(again, map);
    }

    #[test]
    fn segmentation_rejects_bad_input() {
        assert!(SegmentationMap::from_json(r#"{"page":"x","dpi":72,"regions":[]}"#).is_err());
        assert!(SegmentationMap::from_json(
            r#"{"page":"x","dpi":300,"regions":[{"id":"a","class":"photo","rect":[0,0,1,1]}]}"#
        )
        .is_err());
        assert!(SegmentationMap::from_json("not json").is_err());
    }

    #[test]
    fn png_and_pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::from_fn(9, 4, DpiLevel::D300, |x, y| (x * 20 + y) as u8).unwrap();
        let png = dir.path().join("a.png");
        save_png(&img, &png).unwrap();
        assert_eq!(load_gray(&png, DpiLevel::D300).unwrap(), img);

        let mut pgm = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
        pgm.extend_from_slice(img.pixels());
        let pgm_path = dir.path().join("a.pgm");
        std::fs::write(&pgm_path, pgm).unwrap();
        assert_eq!(load_gray(&pgm_path, DpiLevel::D300).unwrap(), img);
    }

    #[test]
    fn rgb_png_is_converted_to_luma() {
        let dir = tempfile::tempdir().unwrap();
        let rgb = image::RgbImage::from_raw(2, 1, vec![255, 0, 0, 255, 255, 255]).unwrap();
        let path = dir.path().join("rgb.png");
        rgb.save(&path).unwrap();
        let g = load_gray(&path, DpiLevel::D300).unwrap();
        assert_eq!(g.pixels(), &[76, 255]);
    }
}
