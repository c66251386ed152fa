//! Command-line front end. Every subcommand is a thin wrapper over the
//! library; [`run`] returns the process exit code.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::corpus::{
    aggregate_ratings, build_samples, load_ratings, synth_corpus, unacceptable_mean_ssim, AugmentationPlan,
    BinarizeMode, CorpusManifest, FeatureTable, SynthSpec,
};
use crate::error::{Error, Result};
use crate::eval::{cross_validate, Origin, Sample};
use crate::learn::{
    fit_model, grid_search, min_acceptable_dpi, FeatureMask, KernelChoice, Label, NormMethod, SvmModel, TrainConfig,
};
use crate::metrics::NUM_FEATURES;
use crate::noise::{calibrate_noise, CalibrationTarget, NoiseKind};
use crate::raster::{crop_region, emulate_dpi, load_gray, save_png, DpiLevel, RegionClass, SegmentationMap};
use crate::serve::{serve, ServeConfig};
use crate::sffs::sffs_select;

#[derive(Debug, Parser)]
#[command(name = "scanres", version, about = "Minimum acceptable scan resolution per image region")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with proxy ratings.
    Synth(SynthArgs),
    /// Write the emulated low-resolution versions of a region.
    Emulate(EmulateArgs),
    /// Extract features of every rated (region, dpi).
    Features(FeaturesArgs),
    /// Extract features of noise-augmented copies of rated regions.
    Augment(AugmentArgs),
    /// Find the noise strength that reaches a target mean SSIM.
    Calibrate(CalibrateArgs),
    /// Fit a model on feature tables.
    Train(TrainArgs),
    /// Run sequential floating forward selection.
    Select(SelectArgs),
    /// Repeated stratified cross-validation.
    Evaluate(EvaluateArgs),
    /// Minimum acceptable dpi of every raster region on a page.
    Predict(PredictArgs),
    /// Host the rating API and UI.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    #[arg(long, env = "SCANRES_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 80)]
    pub n: usize,
    #[arg(long, default_value_t = 96)]
    pub size: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmulateArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, value_parser = parse_dpi)]
    pub dpi: DpiLevel,
    /// Segmentation map; with `--region` crops that region first.
    #[arg(long, requires = "region")]
    pub segmentation: Option<PathBuf>,
    #[arg(long, requires = "segmentation")]
    pub region: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub ratings: PathBuf,
    /// Only score A counts as acceptable.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Gaussian,
    SaltPepper,
}

impl From<KindArg> for NoiseKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Gaussian => NoiseKind::Gaussian,
            KindArg::SaltPepper => NoiseKind::SaltPepper,
        }
    }
}

#[derive(Debug, Args)]
pub struct TargetArgs {
    /// Target mean SSIM, or `auto` for the mean over unacceptable ratings.
    #[arg(long, default_value = "0.63")]
    pub target: String,
    #[arg(long, default_value_t = 0.01)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value_t = 2)]
    pub gaussian: usize,
    #[arg(long, default_value_t = 2)]
    pub salt_pepper: usize,
    /// Fixed Gaussian variance on the [0, 1] scale instead of calibrating.
    #[arg(long)]
    pub gaussian_variance: Option<f64>,
    /// Fixed salt-and-pepper density instead of calibrating.
    #[arg(long)]
    pub salt_pepper_density: Option<f64>,
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Needed for `--target auto`.
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    Rbf,
    Linear,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormArg {
    Zscore,
    Minmax,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "rbf")]
    pub kernel: KernelArg,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// RBF width; defaults to 1 / (d * mean feature variance).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum, default_value = "zscore")]
    pub norm: NormArg,
    /// Comma-separated feature indices to use.
    #[arg(long, value_delimiter = ',')]
    pub mask: Option<Vec<usize>>,
    /// Scale C per class: acceptable,unacceptable.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub class_weight: Option<Vec<f64>>,
}

impl ModelArgs {
    fn config(&self) -> Result<TrainConfig> {
        let mut c = TrainConfig::default();
        c.svm.c = self.c;
        c.svm.kernel = match self.kernel {
            KernelArg::Rbf => KernelChoice::Rbf { gamma: self.gamma },
            KernelArg::Linear => KernelChoice::Linear,
        };
        c.svm.class_weight = self.class_weight.as_ref().map(|w| (w[0], w[1]));
        c.norm = match self.norm {
            NormArg::Zscore => NormMethod::ZScore,
            NormArg::Minmax => NormMethod::MinMax,
        };
        if let Some(m) = &self.mask {
            if let Some(&bad) = m.iter().find(|&&i| i >= NUM_FEATURES) {
                return Err(Error::InvalidDimension {
                    requested: bad,
                    available: NUM_FEATURES,
                });
            }
            c.mask = Some(FeatureMask::from_indices(NUM_FEATURES, m));
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature tables; rated and augmented rows are all used.
    #[arg(long = "features", required = true, num_args = 1..)]
    pub features: Vec<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Pick C and gamma by 5-fold grid search first.
    #[arg(long)]
    pub grid_search: bool,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long = "features", required = true, num_args = 1..)]
    pub features: Vec<PathBuf>,
    #[arg(long, default_value_t = NUM_FEATURES)]
    pub d: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long = "features", required = true, num_args = 1..)]
    pub features: Vec<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub segmentation: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Ratings JSONL to append to (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Also serve the 300 dpi original of each region.
    #[arg(long)]
    pub reference: bool,
    /// Directory of built UI assets served at /.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArg,
}

fn parse_dpi(s: &str) -> std::result::Result<DpiLevel, String> {
    s.parse::<DpiLevel>().map_err(|e| e.to_string())
}

/// Exit code for a library error: 2 for bad input, 1 for runtime failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::UnsupportedDpi(_)
        | Error::DpiMismatch { .. }
        | Error::UpsampleNotAllowed { .. }
        | Error::RegionOutOfBounds(_)
        | Error::WrongRegionClass { .. }
        | Error::InvalidRegion { .. }
        | Error::InvalidNoiseParameter(_)
        | Error::InvalidDimension { .. }
        | Error::ParseError(_)
        | Error::VersionError { .. } => 2,
        _ => 1,
    }
}

fn load_tables(paths: &[PathBuf]) -> Result<Vec<Sample>> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(FeatureTable::load(p)?.samples);
    }
    if all.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(all)
}

fn mode(strict: bool) -> BinarizeMode {
    if strict {
        BinarizeMode::Strict
    } else {
        BinarizeMode::Standard
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("value serializes")
}

fn resolve_target(args: &TargetArgs, manifest: &CorpusManifest, ratings: Option<&Path>, strict: bool) -> Result<CalibrationTarget> {
    let value = if args.target == "auto" {
        let path = ratings.ok_or_else(|| Error::ParseError("--target auto needs --ratings".into()))?;
        let labels = aggregate_ratings(&load_ratings(path)?, mode(strict));
        unacceptable_mean_ssim(&manifest.raster_regions()?, &labels)?.0
    } else {
        args.target
            .parse()
            .map_err(|_| Error::ParseError(format!("--target {:?} is neither a number nor auto", args.target)))?
    };
    CalibrationTarget::new(value, args.tolerance)
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let io = |e: std::io::Error| Error::io("<stdout>", e);
    match cmd {
        Command::Synth(a) => {
            let mut spec = SynthSpec::new(a.n, a.seed.seed);
            spec.size = a.size;
            let corpus = synth_corpus(&spec)?;
            let manifest = corpus.write(&a.out)?;
            let fractions: BTreeMap<u32, f64> = DpiLevel::ASCENDING
                .iter()
                .map(|d| (d.value(), corpus.unacceptable_fraction(*d)))
                .collect();
            writeln!(
                out,
                "{}",
                to_json(&json!({
                    "manifest": manifest,
                    "ratings": a.out.join("ratings.jsonl"),
                    "regions": corpus.regions.len(),
                    "seed": a.seed.seed,
                    "unacceptable_fraction": fractions,
                }))
            )
            .map_err(io)?;
        }
        Command::Emulate(a) => {
            let page = load_gray(&a.image, DpiLevel::BASE)?;
            let region = match (&a.segmentation, &a.region) {
                (Some(seg), Some(id)) => {
                    let map = SegmentationMap::load(seg)?;
                    let spec = map
                        .region_specs()
                        .into_iter()
                        .find(|r| &r.id == id)
                        .ok_or_else(|| Error::ParseError(format!("no region {id:?} in {}", seg.display())))?;
                    crop_region(&page, &spec, true)?
                }
                _ => page,
            };
            let pair = emulate_dpi(&region, a.dpi)?;
            std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
            let native = a.out.join(format!("native_{}.png", a.dpi.value()));
            let at_base = a.out.join(format!("at_base_{}.png", a.dpi.value()));
            save_png(&pair.native_lowres, &native)?;
            save_png(&pair.at_base, &at_base)?;
            writeln!(out, "{}", to_json(&json!({ "native_lowres": native, "at_base": at_base }))).map_err(io)?;
        }
        Command::Features(a) => {
            let manifest = CorpusManifest::load(&a.corpus.manifest)?;
            let ratings = load_ratings(&a.corpus.ratings)?;
            let labels = aggregate_ratings(&ratings, mode(a.corpus.strict));
            let ds = build_samples(&manifest.raster_regions()?, &labels, &AugmentationPlan::default())?;
            for f in &ds.failures {
                writeln!(err, "skipped {} at {:?}: {}", f.region_id, f.dpi, f.error).map_err(io)?;
            }
            let table = FeatureTable::new(ds.samples)
                .with_meta("kind", "rated")
                .with_meta("binarize", mode(a.corpus.strict));
            table.save(&a.out)?;
            writeln!(out, "{}", to_json(&json!({ "samples": table.samples.len(), "failures": ds.failures.len() })))
                .map_err(io)?;
        }
        Command::Augment(a) => {
            let manifest = CorpusManifest::load(&a.corpus.manifest)?;
            let ratings = load_ratings(&a.corpus.ratings)?;
            let labels = aggregate_ratings(&ratings, mode(a.corpus.strict));
            let target = resolve_target(&a.target, &manifest, Some(&a.corpus.ratings), a.corpus.strict)?;
            let plan = AugmentationPlan {
                gaussian_copies: a.gaussian,
                salt_pepper_copies: a.salt_pepper,
                gaussian_variance: a.gaussian_variance,
                salt_pepper_density: a.salt_pepper_density,
                target,
                seed: a.seed.seed,
            };
            let ds = build_samples(&manifest.raster_regions()?, &labels, &plan)?;
            for f in &ds.failures {
                writeln!(err, "skipped {}: {}", f.region_id, f.error).map_err(io)?;
            }
            let augmented: Vec<Sample> = ds.samples.into_iter().filter(|s| s.origin == Origin::Augmented).collect();
            let table = FeatureTable::new(augmented)
                .with_meta("kind", "augmented")
                .with_meta("plan", plan)
                .with_meta("calibrations", &ds.calibrations);
            table.save(&a.out)?;
            writeln!(
                out,
                "{}",
                to_json(&json!({ "samples": table.samples.len(), "calibrations": ds.calibrations }))
            )
            .map_err(io)?;
        }
        Command::Calibrate(a) => {
            let manifest = CorpusManifest::load(&a.manifest)?;
            let target = resolve_target(&a.target, &manifest, a.ratings.as_deref(), false)?;
            let images: Vec<_> = manifest.raster_regions()?.into_iter().map(|r| r.image).collect();
            let c = calibrate_noise(a.kind.into(), &images, target, a.seed.seed)?;
            writeln!(out, "{}", to_json(&json!({ "calibration": c, "target": target, "seed": a.seed.seed })))
                .map_err(io)?;
        }
        Command::Train(a) => {
            let samples = load_tables(&a.features)?;
            let rows: Vec<&[f64]> = samples.iter().map(|s| s.features.as_slice()).collect();
            let labels: Vec<Label> = samples.iter().map(|s| s.label).collect();
            let mut config = a.model.config()?;
            if a.grid_search {
                let (best, points) = grid_search(&rows, &labels, &config, 5, a.seed.seed)?;
                for p in &points {
                    writeln!(err, "C={} gamma={:.4} accuracy={:.4}", p.c, p.gamma, p.accuracy).map_err(io)?;
                }
                config = best;
            }
            let model = fit_model(&rows, &labels, &config)?;
            model.save(&a.out)?;
            writeln!(
                out,
                "{}",
                to_json(&json!({
                    "model": a.out,
                    "samples": samples.len(),
                    "support_vectors": model.support_vectors.len(),
                    "training_digest": model.training_digest,
                }))
            )
            .map_err(io)?;
        }
        Command::Select(a) => {
            let samples = load_tables(&a.features)?;
            let rows: Vec<&[f64]> = samples.iter().map(|s| s.features.as_slice()).collect();
            let labels: Vec<Label> = samples.iter().map(|s| s.label).collect();
            let r = sffs_select(&rows, &labels, a.d, a.seed.seed, &a.model.config()?)?;
            writeln!(
                out,
                "{}",
                to_json(&json!({
                    "ranking": r.ranking,
                    "selected": r.selected,
                    "trace": r.best_by_size,
                    "steps": r.trace,
                }))
            )
            .map_err(io)?;
        }
        Command::Evaluate(a) => {
            let samples = load_tables(&a.features)?;
            let report = cross_validate(&samples, a.runs, a.folds, a.seed.seed, &a.model.config()?)?;
            let text = to_json(&report);
            if let Some(p) = &a.out {
                std::fs::write(p, &text).map_err(|e| Error::io(p, e))?;
            }
            writeln!(out, "{text}").map_err(io)?;
            write!(err, "{}", report.table()).map_err(io)?;
        }
        Command::Predict(a) => {
            let model = SvmModel::load(&a.model)?;
            let page = load_gray(&a.image, DpiLevel::BASE)?;
            let seg = SegmentationMap::load(&a.segmentation)?;
            let mut result = BTreeMap::new();
            for r in seg.region_specs() {
                if r.class == RegionClass::RasterImage {
                    let dpi = min_acceptable_dpi(&model, &page, &r)?;
                    result.insert(r.id.clone(), dpi.value());
                }
            }
            writeln!(out, "{}", to_json(&result)).map_err(io)?;
        }
        Command::Serve(a) => {
            let config = ServeConfig {
                manifest: a.manifest,
                ratings: a.out,
                seed: a.seed.seed,
                addr: a.addr,
                reference: a.reference,
                ui_dir: a.ui_dir,
            };
            tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| Error::io("<runtime>", e))?
                .block_on(serve(config))?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return 2;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
