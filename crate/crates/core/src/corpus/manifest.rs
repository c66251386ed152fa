use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{crop_region, load_gray, DpiLevel, GrayImage, RegionClass, RegionSpec, SegmentationMap};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageEntry {
    /// Relative paths resolve against the manifest's directory.
    pub image: PathBuf,
    pub dpi: u32,
    pub segmentation: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub version: u32,
    pub pages: Vec<PageEntry>,
    #[serde(skip)]
    pub root: PathBuf,
}

/// A raster-image region cut out of its page.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionImage {
    pub id: String,
    pub subset: Option<String>,
    pub image: GrayImage,
}

impl CorpusManifest {
    pub fn new(pages: Vec<PageEntry>) -> Self {
        CorpusManifest {
            version: MANIFEST_VERSION,
            pages,
            root: PathBuf::from("."),
        }
    }

    pub fn from_json(text: &str, root: &Path) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::ParseError(format!("manifest: {e}")))?;
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(MANIFEST_VERSION) => {}
            other => {
                return Err(Error::VersionError {
                    found: format!("{other:?}"),
                    expected: MANIFEST_VERSION.to_string(),
                })
            }
        }
        let mut m: CorpusManifest =
            serde_json::from_value(value).map_err(|e| Error::ParseError(format!("manifest: {e}")))?;
        for p in &m.pages {
            if p.dpi != DpiLevel::BASE.value() {
                return Err(Error::DpiMismatch {
                    expected: DpiLevel::BASE.value(),
                    actual: p.dpi,
                });
            }
        }
        m.root = root.to_path_buf();
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        CorpusManifest::from_json(&text, &root)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// Loads every page and its segmentation.
    pub fn load_pages(&self) -> Result<Vec<(GrayImage, SegmentationMap, Option<String>)>> {
        let mut ids = HashSet::new();
        let mut out = Vec::new();
        for p in &self.pages {
            let page = load_gray(&self.resolve(&p.image), DpiLevel::BASE)?;
            let seg = SegmentationMap::load(&self.resolve(&p.segmentation))?;
            if seg.dpi != DpiLevel::BASE.value() {
                return Err(Error::DpiMismatch {
                    expected: DpiLevel::BASE.value(),
                    actual: seg.dpi,
                });
            }
            for r in &seg.regions {
                if !ids.insert(r.id.clone()) {
                    return Err(Error::ParseError(format!("region id {:?} appears twice", r.id)));
                }
            }
            out.push((page, seg, p.subset.clone()));
        }
        Ok(out)
    }

    /// Every raster-image region, cropped, in manifest order.
    pub fn raster_regions(&self) -> Result<Vec<RegionImage>> {
        let mut out = Vec::new();
        for (page, seg, subset) in self.load_pages()? {
            for spec in seg.region_specs() {
                if spec.class == RegionClass::RasterImage {
                    out.push(RegionImage {
                        id: spec.id.clone(),
                        subset: subset.clone(),
                        image: crop_region(&page, &spec, true)?,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Raster-image regions of one page.
pub fn raster_specs(seg: &SegmentationMap) -> Vec<RegionSpec> {
    seg.region_specs().into_iter().filter(|r| r.class == RegionClass::RasterImage).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_fixture() {
        let text = r#"{
            "version": 1,
            "pages": [
                {"image": "p1.png", "dpi": 300, "segmentation": "p1.json", "subset": "prima"},
                {"image": "/abs/p2.pgm", "dpi": 300, "segmentation": "p2.json"}
            ]
        }"#;
        let m = CorpusManifest::from_json(text, Path::new("/data")).unwrap();
        assert_eq!(m.pages.len(), 2);
        assert_eq!(m.pages[0].subset.as_deref(), Some("prima"));
        assert_eq!(m.pages[1].subset, None);
        assert_eq!(m.resolve(&m.pages[0].image), PathBuf::from("/data/p1.png"));
        assert_eq!(m.resolve(&m.pages[1].image), PathBuf::from("/abs/p2.pgm"));
        let again = CorpusManifest::from_json(&m.to_json(), Path::new("/data")).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn version_and_dpi_checked() {
        let bad = r#"{"version": 2, "pages": []}"#;
        assert!(matches!(CorpusManifest::from_json(bad, Path::new(".")), Err(Error::VersionError { .. })));
        let low = r#"{"version": 1, "pages": [{"image": "a", "dpi": 150, "segmentation": "b"}]}"#;
        assert!(matches!(CorpusManifest::from_json(low, Path::new(".")), Err(Error::DpiMismatch { .. })));
        assert!(matches!(CorpusManifest::from_json("[", Path::new(".")), Err(Error::ParseError(_))));
    }

    #[test]
    fn missing_files_are_io_errors() {
        let m = CorpusManifest::from_json(
            r#"{"version": 1, "pages": [{"image": "nope.png", "dpi": 300, "segmentation": "nope.json"}]}"#,
            Path::new("/nonexistent"),
        )
        .unwrap();
        assert!(matches!(m.load_pages(), Err(Error::Io { .. }) | Err(Error::InvalidImage(_))));
    }
}
