//! The `sgdmix` command line.
//!
//! Exit status: 0 success, 1 runtime failures, 2 usage or configuration errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::Error;
use crate::imaging::{load_image, save_image, save_saliency};
use crate::pipeline::{
    augment_dataset_with, derive_seed, mix_source, plan, prepare_saliency, read_jsonl,
    sample_training_view, AugmentationConfig, ManifestRecord, RefinerChoice, SaliencySource,
    SeedStage,
};
use crate::refinement::{DEFAULT_MAX_IN_FLIGHT, DEFAULT_TIMEOUT};
use crate::saliency::{spectral_residual, SpectralResidualParams};
use crate::selection::{DatasetIndex, DEFAULT_BATCH_SIZE};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Suffix appended to an image's stem for its saliency map.
pub const SALIENCY_SUFFIX: &str = ".saliency.png";

#[derive(Debug, Parser)]
#[command(name = "sgdmix", version, about = "Saliency-guided, label-preserving image mixing")]
struct Cli {
    /// Log level (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute spectral-residual saliency maps as 16-bit PNGs.
    Saliency(SaliencyArgs),
    /// Select a target for one source and write the mixed image and a report.
    Mix(MixArgs),
    /// Augment a whole dataset index.
    Augment(AugmentArgs),
    /// Sample a training view over real and generated samples.
    View(ViewArgs),
}

#[derive(Debug, Args)]
struct SrArgs {
    /// Working resolution for spectral residual.
    #[arg(long, default_value_t = 64)]
    resize_edge: usize,
    /// Box filter size applied to the log spectrum (odd).
    #[arg(long, default_value_t = 3)]
    avg_filter: usize,
    /// Gaussian smoothing sigma in working-resolution pixels.
    #[arg(long, default_value_t = 2.5)]
    sigma: f64,
}

impl SrArgs {
    fn params(&self) -> SpectralResidualParams {
        SpectralResidualParams {
            resize_edge: self.resize_edge,
            avg_filter_size: self.avg_filter,
            smooth_sigma: self.sigma,
        }
    }
}

#[derive(Debug, Args)]
struct SaliencyArgs {
    /// Image file or directory of images.
    #[arg(long)]
    input: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    sr: SrArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SaliencyKind {
    Ingest,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RefinerKind {
    Identity,
    Noise,
    Remote,
}

#[derive(Debug, Args)]
struct MixArgs {
    /// Dataset index JSON.
    #[arg(long)]
    index: PathBuf,
    /// Entry id of the source image.
    #[arg(long)]
    source_id: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SaliencyKind::Ingest)]
    saliency: SaliencyKind,
    #[command(flatten)]
    sr: SrArgs,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    /// Dataset index JSON.
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Candidate targets sampled per source.
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    /// Comma-separated translation strengths, drawn uniformly per sample.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 0.7, 0.9])]
    strengths: Vec<f64>,
    /// Generated samples per real image.
    #[arg(long, default_value_t = 5)]
    multiplier: usize,
    /// Replacement probability; validated here and applied by `view`.
    #[arg(long, default_value_t = 0.1)]
    replace_prob: f64,
    /// Label smoothing confidence on the source class.
    #[arg(long, default_value_t = 0.9)]
    confidence: f64,
    #[arg(long, value_enum, default_value_t = RefinerKind::Identity)]
    refiner: RefinerKind,
    /// Refinement service base URL (remote refiner).
    #[arg(long, env = "SGDMIX_ENDPOINT")]
    endpoint: Option<String>,
    /// Per-request timeout in seconds (remote refiner).
    #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_secs_f64())]
    timeout: f64,
    /// Concurrent requests to the refinement service.
    #[arg(long, default_value_t = DEFAULT_MAX_IN_FLIGHT)]
    max_in_flight: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads. Output does not depend on this.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = SaliencyKind::Ingest)]
    saliency: SaliencyKind,
    /// Metaclass word in the refinement prompt.
    #[arg(long, default_value = "object")]
    metaclass: String,
    /// Print the plan and write nothing.
    #[arg(long)]
    dry_run: bool,
    #[command(flatten)]
    sr: SrArgs,
}

#[derive(Debug, Args)]
struct ViewArgs {
    /// Manifest produced by `augment`.
    #[arg(long)]
    manifest: PathBuf,
    /// Number of real training slots.
    #[arg(long)]
    real_count: usize,
    #[arg(long, default_value_t = 0.1)]
    replace_prob: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .try_init();

    match cli.command {
        Command::Saliency(args) => cmd_saliency(&args),
        Command::Mix(args) => cmd_mix(&args),
        Command::Augment(args) => cmd_augment(&args),
        Command::View(args) => cmd_view(&args),
    }
}

fn status_for(err: &Error) -> u8 {
    match err {
        Error::InvalidParam(_) | Error::Index(_) | Error::NoValidTarget(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        && !path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with(SALIENCY_SUFFIX))
}

fn saliency_output_path(out_dir: &Path, input: &Path) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out_dir.join(format!("{stem}{SALIENCY_SUFFIX}"))
}

fn cmd_saliency(args: &SaliencyArgs) -> u8 {
    let params = args.sr.params();
    if let Err(err) = params.validate() {
        eprintln!("error: {err}");
        return EXIT_USAGE;
    }
    let inputs: Vec<PathBuf> = if args.input.is_dir() {
        let listing = match std::fs::read_dir(&args.input) {
            Ok(listing) => listing,
            Err(err) => {
                eprintln!("error: cannot list {}: {err}", args.input.display());
                return EXIT_FAILURE;
            }
        };
        let mut files: Vec<PathBuf> = listing
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_image_file(p))
            .collect();
        files.sort();
        files
    } else {
        vec![args.input.clone()]
    };
    if inputs.is_empty() {
        log::warn!("no images found in {}", args.input.display());
        return EXIT_OK;
    }
    if let Err(err) = std::fs::create_dir_all(&args.out) {
        eprintln!("error: cannot create {}: {err}", args.out.display());
        return EXIT_FAILURE;
    }
    let mut failed = 0usize;
    for input in &inputs {
        let result = load_image(input)
            .and_then(|img| spectral_residual(&img, &params))
            .and_then(|map| save_saliency(&map, saliency_output_path(&args.out, input)));
        if let Err(err) = result {
            eprintln!("error: {}: {err}", input.display());
            failed += 1;
        }
    }
    log::info!("{} saliency maps written, {failed} failed", inputs.len() - failed);
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

fn saliency_source(kind: SaliencyKind, sr: &SrArgs) -> SaliencySource {
    match kind {
        SaliencyKind::Ingest => SaliencySource::Ingest,
        SaliencyKind::Spectral => SaliencySource::SpectralResidual(sr.params()),
    }
}

/// JSON report written by `sgdmix mix`.
#[derive(Debug, Serialize)]
pub struct MixReport {
    pub source_id: usize,
    pub target_id: usize,
    pub l2_distance: f64,
    pub candidate_ids: Vec<usize>,
    pub source_threshold: u8,
    pub target_threshold: u8,
    pub source_degenerate: bool,
    pub target_degenerate: bool,
    pub mask_foreground: usize,
    pub batch_seed: u64,
    pub mixed_image: PathBuf,
}

fn cmd_mix(args: &MixArgs) -> u8 {
    let index = match DatasetIndex::load(&args.index) {
        Ok(index) => index,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_USAGE;
        }
    };
    if args.source_id >= index.len() {
        eprintln!(
            "error: source id {} out of range for {} entries",
            args.source_id,
            index.len()
        );
        return EXIT_USAGE;
    }
    if args.batch_size == 0 {
        eprintln!("error: batch size must be at least 1");
        return EXIT_USAGE;
    }
    let source = saliency_source(args.saliency, &args.sr);
    let result = (|| -> crate::Result<MixReport> {
        let maps = prepare_saliency(&index, &source)?;
        let batch_seed = derive_seed(args.seed, args.source_id, 0, SeedStage::Batch);
        let mix = mix_source(&index, &maps, args.source_id, args.batch_size, batch_seed)?;
        std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
        let image_name = PathBuf::from(format!("mixed_{:06}.png", args.source_id));
        save_image(&mix.mixed, args.out.join(&image_name))?;
        save_image(
            &mix.mask.to_image(),
            args.out.join(format!("mask_{:06}.png", args.source_id)),
        )?;
        let report = MixReport {
            source_id: args.source_id,
            target_id: mix.selection.target_entry_id,
            l2_distance: mix.selection.l2_distance,
            candidate_ids: mix.selection.candidate_ids,
            source_threshold: mix.source_otsu.threshold,
            target_threshold: mix.target_otsu.threshold,
            source_degenerate: mix.source_otsu.degenerate,
            target_degenerate: mix.target_otsu.degenerate,
            mask_foreground: mix.mask.count_foreground(),
            batch_seed,
            mixed_image: image_name,
        };
        let path = args.out.join(format!("mix_{:06}.json", args.source_id));
        std::fs::write(&path, serde_json::to_string_pretty(&report)?)
            .map_err(|e| Error::io(&path, e))?;
        Ok(report)
    })();
    match result {
        Ok(report) => {
            println!(
                "source {} -> target {} (distance {:.6}, thresholds {}/{})",
                report.source_id,
                report.target_id,
                report.l2_distance,
                report.source_threshold,
                report.target_threshold
            );
            EXIT_OK
        }
        Err(err) => {
            eprintln!("error: {err}");
            status_for(&err)
        }
    }
}

fn augment_config(args: &AugmentArgs) -> crate::Result<AugmentationConfig> {
    let refiner = match args.refiner {
        RefinerKind::Identity => RefinerChoice::Identity,
        RefinerKind::Noise => RefinerChoice::NoiseStub,
        RefinerKind::Remote => {
            let endpoint = args.endpoint.clone().ok_or_else(|| {
                Error::InvalidParam("remote refiner needs --endpoint or SGDMIX_ENDPOINT".into())
            })?;
            if !(args.timeout > 0.0 && args.timeout.is_finite()) {
                return Err(Error::InvalidParam(format!(
                    "timeout {} must be positive",
                    args.timeout
                )));
            }
            RefinerChoice::Remote {
                endpoint,
                timeout: Duration::from_secs_f64(args.timeout),
                max_in_flight: args.max_in_flight.max(1),
            }
        }
    };
    let cfg = AugmentationConfig {
        batch_size: args.batch_size,
        strengths: args.strengths.clone(),
        expansion_multiplier: args.multiplier,
        replacement_probability: args.replace_prob,
        smoothing_confidence: args.confidence,
        master_seed: args.seed,
        refiner,
        saliency_source: saliency_source(args.saliency, &args.sr),
        metaclass: args.metaclass.clone(),
        ..AugmentationConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_augment(args: &AugmentArgs) -> u8 {
    let cfg = match augment_config(args) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_USAGE;
        }
    };
    let index = match DatasetIndex::load(&args.index) {
        Ok(index) => index,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_USAGE;
        }
    };

    if args.dry_run {
        let planned = plan(&index, &cfg);
        println!(
            "plan: {} entries, {} samples, batch size {}, strengths {:?}, refiner {:?}",
            planned.entries,
            planned.samples.len(),
            cfg.batch_size,
            cfg.strengths,
            cfg.refiner
        );
        for (class_id, count) in &planned.per_class {
            let name = index.classes().get(*class_id).map(String::as_str).unwrap_or("?");
            println!("  class {class_id} ({name}): {count} samples");
        }
        println!("output: {} (nothing written)", args.out.display());
        return EXIT_OK;
    }

    let started = Instant::now();
    let refiner = cfg.refiner.build();
    match augment_dataset_with(&index, &cfg, refiner.as_ref(), &args.out, args.workers) {
        Ok(report) => {
            println!(
                "{} generated, {} failed in {:.2}s",
                report.records.len(),
                report.failures.len(),
                started.elapsed().as_secs_f64()
            );
            if report.failures.is_empty() {
                EXIT_OK
            } else {
                EXIT_FAILURE
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            status_for(&err)
        }
    }
}

fn cmd_view(args: &ViewArgs) -> u8 {
    let records: Vec<ManifestRecord> = match read_jsonl(&args.manifest) {
        Ok(records) => records,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_FAILURE;
        }
    };
    match sample_training_view(args.real_count, &records, args.replace_prob, args.seed) {
        Ok(view) => {
            for slot in view {
                println!("{}", serde_json::to_string(&slot).expect("slot serializes"));
            }
            EXIT_OK
        }
        Err(err) => {
            eprintln!("error: {err}");
            EXIT_USAGE
        }
    }
}
