//! Procedural 300 dpi regions rated by simulated raters who threshold the
//! SSIM between a region and its emulated low-resolution version.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{CorpusManifest, PageEntry, RegionImage};
use super::ratings::{aggregate_ratings, save_ratings, BinarizeMode, RatingKey, RatingRecord, Score};
use crate::error::{Error, Result};
use crate::learn::Label;
use crate::metrics::ssim;
use crate::raster::{emulate_dpi, save_png, DpiLevel, GrayImage, RegionClass, RegionEntry, RegionShape, SegmentationMap};
use crate::seed::{derive_seed, rng};

const MAX_ATTEMPTS: usize = 64;
const EPOCH: i64 = 1_704_067_200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Texture {
    BandLimitedNoise,
    Gradient,
    Halftone,
    Strokes,
}

impl Texture {
    pub const ALL: [Texture; 4] = [Texture::BandLimitedNoise, Texture::Gradient, Texture::Halftone, Texture::Strokes];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_regions: usize,
    /// Side length of each square region in pixels at 300 dpi.
    pub size: usize,
    /// Textures are assigned round-robin.
    pub textures: Vec<Texture>,
    pub seed: u64,
    /// SSIM boundaries A|B, B|C and C|D.
    pub thresholds: [f64; 3],
    pub raters: usize,
    /// Each rater's boundaries are shifted by up to this much per region.
    pub jitter: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_regions: 80,
            size: 96,
            textures: Texture::ALL.to_vec(),
            seed: 0,
            thresholds: [0.95, 0.80, 0.63],
            raters: 3,
            jitter: 0.03,
        }
    }
}

impl SynthSpec {
    pub fn new(n_regions: usize, seed: u64) -> Self {
        SynthSpec {
            n_regions,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthRegion {
    pub id: String,
    pub texture: Texture,
    pub image: GrayImage,
    /// SSIM against the emulation, in `DpiLevel::ASCENDING` order.
    pub ssim: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub spec: SynthSpec,
    pub regions: Vec<SynthRegion>,
    pub ratings: Vec<RatingRecord>,
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn band_limited(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let cutoff = r.random_range(0.03..0.2);
    let amp = r.random_range(30.0..100.0);
    let waves: Vec<(f64, f64, f64, f64)> = (0..24)
        .map(|_| {
            let f = cutoff * r.random::<f64>().sqrt();
            let a = r.random_range(0.0..PI);
            (f * a.cos(), f * a.sin(), r.random_range(0.0..2.0 * PI), r.random_range(0.3..1.0))
        })
        .collect();
    let norm: f64 = waves.iter().map(|w| w.3 * w.3).sum::<f64>().sqrt();
    let base = r.random_range(90.0..170.0);
    (0..n * n)
        .map(|i| {
            let (x, y) = ((i % n) as f64, (i / n) as f64);
            let s: f64 = waves.iter().map(|&(fx, fy, ph, w)| w * (2.0 * PI * (fx * x + fy * y) + ph).sin()).sum();
            base + amp * 1.4 * s / norm
        })
        .collect()
}

fn gradient(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let (gx, gy) = (r.random_range(-1.5..1.5), r.random_range(-1.5..1.5));
    let (cx, cy) = (r.random_range(0.0..n as f64), r.random_range(0.0..n as f64));
    let radial = r.random_range(-0.02..0.02);
    let detail = r.random_range(2.0..30.0);
    let f = r.random_range(0.02..0.25);
    let a = r.random_range(0.0..PI);
    let base = r.random_range(60.0..190.0);
    (0..n * n)
        .map(|i| {
            let (x, y) = ((i % n) as f64, (i / n) as f64);
            let d2 = (x - cx).powi(2) + (y - cy).powi(2);
            base + gx * (x - n as f64 / 2.0) + gy * (y - n as f64 / 2.0) + radial * d2 / 4.0
                + detail * (2.0 * PI * f * (x * a.cos() + y * a.sin())).sin()
        })
        .collect()
}

fn halftone(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let period = r.random_range(8.0..20.0);
    let angle = r.random_range(0.0..PI / 2.0);
    let (ink, paper) = (r.random_range(10.0..70.0), r.random_range(200.0..250.0));
    let (tx, ty) = (r.random_range(-0.03..0.03), r.random_range(-0.03..0.03));
    let (c, s) = (angle.cos(), angle.sin());
    (0..n * n)
        .map(|i| {
            let (x, y) = ((i % n) as f64, (i / n) as f64);
            let tone = (0.5 + tx * (x - n as f64 / 2.0) + ty * (y - n as f64 / 2.0)).clamp(0.05, 0.95);
            let (u, v) = ((c * x + s * y) / period, (-s * x + c * y) / period);
            let (du, dv) = (u - u.round(), v - v.round());
            let radius = (tone / PI).sqrt();
            let edge = (radius - (du * du + dv * dv).sqrt()) * period + 0.5;
            paper + (ink - paper) * edge.clamp(0.0, 1.0)
        })
        .collect()
}

fn strokes(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let (ink, paper) = (r.random_range(0.0..80.0), r.random_range(190.0..255.0));
    let width = r.random_range(1.0..4.5);
    let count = r.random_range(6..22);
    let segs: Vec<[f64; 4]> = (0..count)
        .map(|_| {
            let (x0, y0) = (r.random_range(0.0..n as f64), r.random_range(0.0..n as f64));
            let len = r.random_range(8.0..n as f64 / 2.0);
            let a = r.random_range(0.0..2.0 * PI);
            [x0, y0, x0 + len * a.cos(), y0 + len * a.sin()]
        })
        .collect();
    (0..n * n)
        .map(|i| {
            let (px, py) = ((i % n) as f64 + 0.5, (i / n) as f64 + 0.5);
            let d = segs
                .iter()
                .map(|&[x0, y0, x1, y1]| {
                    let (dx, dy) = (x1 - x0, y1 - y0);
                    let t = (((px - x0) * dx + (py - y0) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
                    ((px - x0 - t * dx).powi(2) + (py - y0 - t * dy).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            // one pixel of linear anti-aliasing at the stroke edge
            let cover = (width / 2.0 + 0.5 - d).clamp(0.0, 1.0);
            paper + (ink - paper) * cover
        })
        .collect()
}

pub fn generate_texture(texture: Texture, size: usize, seed: u64) -> GrayImage {
    let mut r = rng(seed);
    let v = match texture {
        Texture::BandLimitedNoise => band_limited(&mut r, size),
        Texture::Gradient => gradient(&mut r, size),
        Texture::Halftone => halftone(&mut r, size),
        Texture::Strokes => strokes(&mut r, size),
    };
    GrayImage::new(size, size, DpiLevel::BASE, v.into_iter().map(quantize).collect()).expect("square texture")
}

/// SSIM of a region against its emulation at each dpi, ascending.
pub fn emulation_ssim(img: &GrayImage) -> Result<[f64; 4]> {
    let mut out = [1.0; 4];
    for (k, d) in DpiLevel::ASCENDING.into_iter().enumerate() {
        out[k] = ssim(img, &emulate_dpi(img, d)?.at_base)?;
    }
    Ok(out)
}

fn score(value: f64, t: [f64; 3]) -> Score {
    if value >= t[0] {
        Score::A
    } else if value >= t[1] {
        Score::B
    } else if value >= t[2] {
        Score::C
    } else {
        Score::D
    }
}

/// One rater's view of one region: each boundary shifted independently.
fn rater_thresholds(spec: &SynthSpec, rater: usize, region: usize) -> [f64; 3] {
    let mut r = rng(derive_seed(spec.seed, &[0x7261_7465, rater as u64, region as u64]));
    let mut t = spec.thresholds;
    for v in &mut t {
        *v += r.random_range(-spec.jitter..=spec.jitter);
    }
    t
}

fn rate(spec: &SynthSpec, index: usize, id: &str, ssim: &[f64; 4]) -> Vec<RatingRecord> {
    let mut out = Vec::new();
    for (k, d) in DpiLevel::ASCENDING.into_iter().enumerate() {
        for rater in 0..spec.raters {
            let t = rater_thresholds(spec, rater, index);
            out.push(RatingRecord {
                region_id: id.to_string(),
                dpi: d,
                rater_id: format!("proxy{rater}"),
                // identity emulation is always top quality
                score: if d == DpiLevel::BASE { Score::A } else { score(ssim[k], t) },
                timestamp: String::new(),
            });
        }
    }
    out
}

fn monotone(records: &[RatingRecord]) -> bool {
    let labels = aggregate_ratings(records, BinarizeMode::Standard);
    let seq: Vec<Label> = labels.values().copied().collect();
    // keys sort by dpi ascending for a single region
    seq.windows(2).all(|w| !(w[0] == Label::Acceptable && w[1] == Label::Unacceptable))
}

pub fn synth_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    if spec.n_regions < 4 {
        return Err(Error::TooFewSamples { n: spec.n_regions, k: 4 });
    }
    if spec.textures.is_empty() || spec.raters == 0 {
        return Err(Error::EmptyInput);
    }
    if spec.size < 24 {
        return Err(Error::ImageTooSmall {
            width: spec.size,
            height: spec.size,
            min: 24,
        });
    }
    use rayon::prelude::*;
    let made: Vec<(SynthRegion, Vec<RatingRecord>)> = (0..spec.n_regions)
        .into_par_iter()
        .map(|i| {
            let texture = spec.textures[i % spec.textures.len()];
            let id = format!("r{i:04}");
            for attempt in 0..MAX_ATTEMPTS {
                let image = generate_texture(texture, spec.size, derive_seed(spec.seed, &[i as u64, attempt as u64]));
                let s = emulation_ssim(&image)?;
                let records = rate(spec, i, &id, &s);
                if monotone(&records) {
                    return Ok((SynthRegion { id, texture, image, ssim: s }, records));
                }
            }
            Err(Error::InvalidImage(format!("no monotone {texture:?} region after {MAX_ATTEMPTS} attempts")))
        })
        .collect::<Result<_>>()?;
    let mut regions = Vec::with_capacity(made.len());
    let mut ratings = Vec::new();
    for (r, recs) in made {
        regions.push(r);
        ratings.extend(recs);
    }
    for (k, rec) in ratings.iter_mut().enumerate() {
        rec.timestamp = chrono::DateTime::from_timestamp(EPOCH + k as i64, 0)
            .expect("timestamp in range")
            .format("%Y-%m-%dT%H:%M:%SZ")
            .to_string();
    }
    Ok(SynthCorpus {
        spec: spec.clone(),
        regions,
        ratings,
    })
}

impl SynthCorpus {
    pub fn labels(&self, mode: BinarizeMode) -> BTreeMap<RatingKey, Label> {
        aggregate_ratings(&self.ratings, mode)
    }

    pub fn region_images(&self) -> Vec<RegionImage> {
        self.regions
            .iter()
            .map(|r| RegionImage {
                id: r.id.clone(),
                subset: Some("synthetic".into()),
                image: r.image.clone(),
            })
            .collect()
    }

    /// Fraction of (region, dpi) labels that are unacceptable at `dpi`.
    pub fn unacceptable_fraction(&self, dpi: DpiLevel) -> f64 {
        let labels = self.labels(BinarizeMode::Standard);
        let at: Vec<&Label> = labels.iter().filter(|((_, d), _)| *d == dpi).map(|(_, l)| l).collect();
        at.iter().filter(|l| ***l == Label::Unacceptable).count() as f64 / at.len().max(1) as f64
    }

    /// Writes one page per region (with a text strip below it), the
    /// segmentation maps, `ratings.jsonl` and `manifest.json` into `dir`.
    /// Returns the manifest path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let pages = dir.join("pages");
        std::fs::create_dir_all(&pages).map_err(|e| Error::io(&pages, e))?;
        let n = self.spec.size;
        let (pw, ph) = (n + 16, n + 40);
        let mut entries = Vec::new();
        for r in &self.regions {
            let page = GrayImage::from_fn(pw, ph, DpiLevel::BASE, |x, y| {
                if (8..8 + n).contains(&x) && (8..8 + n).contains(&y) {
                    r.image.get(x - 8, y - 8)
                } else if y >= n + 20 && y < n + 32 && x >= 8 && x < 8 + n && (x / 3 + y) % 4 == 0 {
                    20
                } else {
                    255
                }
            })?;
            let image = PathBuf::from("pages").join(format!("{}.png", r.id));
            let seg_path = PathBuf::from("pages").join(format!("{}.json", r.id));
            save_png(&page, &dir.join(&image))?;
            let seg = SegmentationMap {
                page: image.to_string_lossy().into_owned(),
                dpi: DpiLevel::BASE.value(),
                regions: vec![
                    RegionEntry {
                        id: r.id.clone(),
                        class: RegionClass::RasterImage,
                        shape: RegionShape::Rect([8, 8, n, n]),
                    },
                    RegionEntry {
                        id: format!("{}-caption", r.id),
                        class: RegionClass::Text,
                        shape: RegionShape::Rect([8, n + 18, n, 16]),
                    },
                ],
            };
            let p = dir.join(&seg_path);
            std::fs::write(&p, seg.to_json()).map_err(|e| Error::io(&p, e))?;
            entries.push(PageEntry {
                image,
                dpi: DpiLevel::BASE.value(),
                segmentation: seg_path,
                subset: Some("synthetic".into()),
            });
        }
        save_ratings(&self.ratings, &dir.join("ratings.jsonl"))?;
        let manifest = dir.join("manifest.json");
        CorpusManifest::new(entries).save(&manifest)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_dpi_always_rated_a() {
        let c = synth_corpus(&SynthSpec::new(8, 3)).unwrap();
        for r in &c.ratings {
            if r.dpi == DpiLevel::BASE {
                assert_eq!(r.score, Score::A);
            }
        }
        for r in &c.regions {
            assert_eq!(r.ssim[3], 1.0);
        }
    }

    #[test]
    fn deterministic_and_monotone() {
        let spec = SynthSpec::new(12, 9);
        let a = synth_corpus(&spec).unwrap();
        assert_eq!(a, synth_corpus(&spec).unwrap());
        let labels = a.labels(BinarizeMode::Standard);
        for r in &a.regions {
            let seq: Vec<Label> = DpiLevel::ASCENDING.iter().map(|d| labels[&(r.id.clone(), *d)]).collect();
            for w in seq.windows(2) {
                assert!(!(w[0] == Label::Acceptable && w[1] == Label::Unacceptable), "{}: {seq:?}", r.id);
            }
        }
        assert_eq!(a.ratings.len(), 12 * 4 * 3);
        assert!(a.ratings[1].timestamp > a.ratings[0].timestamp);
    }

    #[test]
    fn imbalance_profile() {
        let c = synth_corpus(&SynthSpec::new(60, 1)).unwrap();
        assert_eq!(c.unacceptable_fraction(DpiLevel::D300), 0.0);
        assert!(c.unacceptable_fraction(DpiLevel::D100) >= 0.3);
        assert!(c.unacceptable_fraction(DpiLevel::D200) <= c.unacceptable_fraction(DpiLevel::D100));
    }

    #[test]
    fn rejects_tiny_specs() {
        assert!(synth_corpus(&SynthSpec::new(3, 0)).is_err());
    }
}
