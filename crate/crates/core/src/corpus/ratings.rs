use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::Label;
use crate::raster::DpiLevel;

/// Four-level subjective quality score, A best.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Score {
    A,
    B,
    C,
    D,
}

impl Score {
    pub const ALL: [Score; 4] = [Score::A, Score::B, Score::C, Score::D];

    pub fn description(self) -> &'static str {
        match self {
            Score::A => "Visually Pleasant",
            Score::B => "Visually Okay",
            Score::C => "Visually Okay with Some Artifacts",
            Score::D => "Visually Unacceptable",
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for Score {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(Score::A),
            "B" => Ok(Score::B),
            "C" => Ok(Score::C),
            "D" => Ok(Score::D),
            other => Err(Error::ParseError(format!("invalid score {other:?}; expected A, B, C or D"))),
        }
    }
}

/// Standard: A and B are acceptable. Strict: only A.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinarizeMode {
    #[default]
    Standard,
    Strict,
}

pub fn binarize(score: Score, mode: BinarizeMode) -> Label {
    match (score, mode) {
        (Score::A, _) | (Score::B, BinarizeMode::Standard) => Label::Acceptable,
        _ => Label::Unacceptable,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub region_id: String,
    pub dpi: DpiLevel,
    pub rater_id: String,
    pub score: Score,
    pub timestamp: String,
}

pub type RatingKey = (String, DpiLevel);

/// Majority vote of binarised scores per (region, dpi); ties go to
/// unacceptable.
pub fn aggregate_ratings(records: &[RatingRecord], mode: BinarizeMode) -> BTreeMap<RatingKey, Label> {
    let mut votes: BTreeMap<RatingKey, (usize, usize)> = BTreeMap::new();
    for r in records {
        let v = votes.entry((r.region_id.clone(), r.dpi)).or_default();
        match binarize(r.score, mode) {
            Label::Acceptable => v.0 += 1,
            Label::Unacceptable => v.1 += 1,
        }
    }
    votes
        .into_iter()
        .map(|(k, (acc, unacc))| (k, if acc > unacc { Label::Acceptable } else { Label::Unacceptable }))
        .collect()
}

pub fn ratings_to_jsonl(records: &[RatingRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("record serializes"));
        s.push('\n');
    }
    s
}

/// Parses JSONL, rejecting a repeated (region, dpi, rater) triple.
pub fn ratings_from_jsonl(text: &str) -> Result<Vec<RatingRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: RatingRecord =
            serde_json::from_str(line).map_err(|e| Error::ParseError(format!("ratings line {}: {e}", n + 1)))?;
        if !seen.insert((r.region_id.clone(), r.dpi, r.rater_id.clone())) {
            return Err(Error::ParseError(format!(
                "ratings line {}: duplicate rating of {}@{} by {}",
                n + 1,
                r.region_id,
                r.dpi,
                r.rater_id
            )));
        }
        out.push(r);
    }
    Ok(out)
}

pub fn load_ratings(path: &Path) -> Result<Vec<RatingRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ratings_from_jsonl(&text)
}

pub fn save_ratings(records: &[RatingRecord], path: &Path) -> Result<()> {
    std::fs::write(path, ratings_to_jsonl(records)).map_err(|e| Error::io(path, e))
}
