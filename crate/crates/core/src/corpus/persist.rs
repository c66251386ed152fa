//! Feature tables as CSV with a one-line JSON metadata comment.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Sample;
use crate::metrics::{FeatureVector, NUM_FEATURES};
use crate::raster::DpiLevel;

pub const FEATURES_VERSION: u32 = 1;
const FORMAT: &str = "scanres-features";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    meta: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    /// Free-form provenance, e.g. seeds and calibrated parameters.
    pub meta: BTreeMap<String, serde_json::Value>,
    pub samples: Vec<Sample>,
}

fn column_names() -> Vec<String> {
    let mut h: Vec<String> = ["region_id", "dpi", "origin", "label"].iter().map(|s| s.to_string()).collect();
    h.extend((0..NUM_FEATURES).map(|i| format!("f{i}")));
    h
}

impl FeatureTable {
    pub fn new(samples: Vec<Sample>) -> Self {
        FeatureTable {
            meta: BTreeMap::new(),
            samples,
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Serialize) -> Self {
        self.meta.insert(key.to_string(), serde_json::to_value(value).expect("meta serializes"));
        self
    }

    pub fn to_csv(&self) -> String {
        let header = Header {
            format: FORMAT.into(),
            version: FEATURES_VERSION,
            meta: self.meta.clone(),
        };
        let mut out = format!("# {}\n", serde_json::to_string(&header).expect("header serializes"));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(column_names()).expect("in-memory write");
        for s in &self.samples {
            let mut rec = vec![
                s.region_id.clone(),
                s.dpi.value().to_string(),
                s.origin.name().to_string(),
                s.label.name().to_string(),
            ];
            rec.extend(s.features.0.iter().map(|v| v.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 csv"));
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (first, body) = text.split_once('\n').unwrap_or((text, ""));
        let header: Header = first
            .strip_prefix("# ")
            .and_then(|j| serde_json::from_str(j).ok())
            .ok_or_else(|| Error::VersionError {
                found: "missing header".into(),
                expected: FEATURES_VERSION.to_string(),
            })?;
        if header.format != FORMAT || header.version != FEATURES_VERSION {
            return Err(Error::VersionError {
                found: format!("{} v{}", header.format, header.version),
                expected: format!("{FORMAT} v{FEATURES_VERSION}"),
            });
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let cols: Vec<String> = r
            .headers()
            .map_err(|e| Error::ParseError(format!("features header: {e}")))?
            .iter()
            .map(String::from)
            .collect();
        if cols != column_names() {
            return Err(Error::ParseError(format!("unexpected feature columns {cols:?}")));
        }
        let mut samples = Vec::new();
        for (n, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::ParseError(format!("features row {}: {e}", n + 1)))?;
            let bad = |what: &str| Error::ParseError(format!("features row {}: bad {what}", n + 1));
            let dpi: u32 = rec[1].parse().map_err(|_| bad("dpi"))?;
            let mut f = [0.0; NUM_FEATURES];
            for (i, v) in f.iter_mut().enumerate() {
                *v = rec[4 + i].parse().map_err(|_| bad("feature value"))?;
            }
            samples.push(Sample {
                region_id: rec[0].to_string(),
                dpi: DpiLevel::from_value(dpi)?,
                origin: rec[2].parse()?,
                label: rec[3].parse()?,
                features: FeatureVector(f),
            });
        }
        Ok(FeatureTable {
            meta: header.meta,
            samples,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        FeatureTable::from_csv(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::Origin;
    use crate::learn::Label;
    use proptest::prelude::*;

    fn sample_strategy() -> impl Strategy<Value = Sample> {
        (
            "[a-z0-9,+\" ]{1,12}",
            0usize..4,
            any::<bool>(),
            any::<bool>(),
            proptest::array::uniform9(-1e6f64..1e6),
        )
            .prop_map(|(id, d, aug, acc, f)| Sample {
                region_id: id,
                dpi: DpiLevel::ASCENDING[d],
                origin: if aug { Origin::Augmented } else { Origin::Rated },
                label: if acc { Label::Acceptable } else { Label::Unacceptable },
                features: FeatureVector(f),
            })
    }

    proptest! {
        #[test]
        fn round_trip(samples in proptest::collection::vec(sample_strategy(), 0..20)) {
            let t = FeatureTable::new(samples).with_meta("seed", 42u64);
            let text = t.to_csv();
            let back = FeatureTable::from_csv(&text).unwrap();
            prop_assert_eq!(&back, &t);
            prop_assert_eq!(back.to_csv(), text);
        }
    }

    #[test]
    fn header_and_versions() {
        let t = FeatureTable::new(vec![]);
        let text = t.to_csv();
        assert!(text.lines().nth(1).unwrap().starts_with("region_id,dpi,origin,label,f0,f1"));
        let bumped = text.replace("\"version\":1", "\"version\":9");
        assert!(matches!(FeatureTable::from_csv(&bumped), Err(Error::VersionError { .. })));
        assert!(matches!(FeatureTable::from_csv("region_id,dpi\n"), Err(Error::VersionError { .. })));
        let broken = format!("{text}r,100,rated,acceptable,1,2\n");
        assert!(matches!(FeatureTable::from_csv(&broken), Err(Error::ParseError(_))));
    }
}
