//! End-to-end augmentation over a dataset index.
//!
//! For every source entry and repetition: sample a target batch, select the
//! closest saliency map, threshold both maps, merge the masks, composite the
//! source foreground over the target, refine, and write a PNG plus one
//! manifest line. Every generated sample carries its source's label.
//!
//! Each sample's content depends only on seeds derived from
//! `(master_seed, entry_id, repetition, stage)`, so output is identical for
//! any worker count.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::imaging::{load_image, load_saliency, save_image, BinaryMask, Image, SaliencyMap};
use crate::masking::{composite, otsu_threshold, union_masks, OtsuResult};
use crate::refinement::{
    IdentityRefiner, NoiseSchedule, NoiseStubRefiner, PromptSpec, RefineError, RefineRequest,
    Refiner, RemoteRefiner, DEFAULT_MAX_IN_FLIGHT, DEFAULT_TIMEOUT,
};
use crate::saliency::{spectral_residual, SpectralResidualParams};
use crate::selection::{sample_target_batch, select_target, DatasetIndex, SelectionOutcome};

pub const DEFAULT_EXPANSION_MULTIPLIER: usize = 5;
pub const DEFAULT_REPLACEMENT_PROBABILITY: f64 = 0.1;
pub const DEFAULT_SMOOTHING_CONFIDENCE: f64 = 0.9;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";
pub const IMAGES_DIR: &str = "images";

/// Stage tags mixed into per-sample seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStage {
    Batch,
    Strength,
    Noise,
}

impl SeedStage {
    fn tag(self) -> &'static [u8] {
        match self {
            SeedStage::Batch => b"batch",
            SeedStage::Strength => b"strength",
            SeedStage::Noise => b"noise",
        }
    }
}

/// First eight bytes (little endian) of SHA-256 over the master seed, entry,
/// repetition and stage tag.
pub fn derive_seed(master_seed: u64, entry_id: usize, repetition: usize, stage: SeedStage) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update((entry_id as u64).to_le_bytes());
    hasher.update((repetition as u64).to_le_bytes());
    hasher.update(stage.tag());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RefinerChoice {
    Identity,
    NoiseStub,
    Remote {
        endpoint: String,
        timeout: Duration,
        max_in_flight: usize,
    },
}

impl RefinerChoice {
    pub fn remote(endpoint: impl Into<String>) -> Self {
        RefinerChoice::Remote {
            endpoint: endpoint.into(),
            timeout: DEFAULT_TIMEOUT,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        }
    }

    pub fn build(&self) -> Box<dyn Refiner> {
        match self {
            RefinerChoice::Identity => Box::new(IdentityRefiner),
            RefinerChoice::NoiseStub => Box::new(NoiseStubRefiner {
                schedule: NoiseSchedule::default(),
            }),
            RefinerChoice::Remote {
                endpoint,
                timeout,
                max_in_flight,
            } => Box::new(RemoteRefiner::with_max_in_flight(
                endpoint.clone(),
                *timeout,
                *max_in_flight,
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SaliencySource {
    /// Read each entry's precomputed 16-bit saliency PNG.
    Ingest,
    /// Compute spectral-residual saliency from each image.
    SpectralResidual(SpectralResidualParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationConfig {
    pub batch_size: usize,
    pub strengths: Vec<f64>,
    pub expansion_multiplier: usize,
    pub replacement_probability: f64,
    pub smoothing_confidence: f64,
    pub master_seed: u64,
    pub refiner: RefinerChoice,
    pub saliency_source: SaliencySource,
    /// Coarse category word in the refinement prompt.
    pub metaclass: String,
    /// Per-class overrides of `expansion_multiplier`, keyed by class id.
    pub class_multipliers: BTreeMap<usize, usize>,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self::fine_grained()
    }
}

impl AugmentationConfig {
    /// Fine-grained classification setting: S in {0.5, 0.7, 0.9}, x5, p = 0.1.
    pub fn fine_grained() -> Self {
        Self {
            batch_size: crate::selection::DEFAULT_BATCH_SIZE,
            strengths: vec![0.5, 0.7, 0.9],
            expansion_multiplier: DEFAULT_EXPANSION_MULTIPLIER,
            replacement_probability: DEFAULT_REPLACEMENT_PROBABILITY,
            smoothing_confidence: DEFAULT_SMOOTHING_CONFIDENCE,
            master_seed: 0,
            refiner: RefinerChoice::Identity,
            saliency_source: SaliencySource::Ingest,
            metaclass: "object".into(),
            class_multipliers: BTreeMap::new(),
        }
    }

    /// Long-tail setting: a single strength of 0.7.
    pub fn long_tail() -> Self {
        Self {
            strengths: vec![0.7],
            ..Self::fine_grained()
        }
    }

    /// Few-shot setting: S = 0.9 with replacement probability 0.5, 0.3, 0.2
    /// for 1, 5, 10 shots and 0.1 otherwise.
    pub fn few_shot(shots: Option<usize>) -> Self {
        let replacement_probability = match shots {
            Some(1) => 0.5,
            Some(5) => 0.3,
            Some(10) => 0.2,
            _ => 0.1,
        };
        Self {
            strengths: vec![0.9],
            replacement_probability,
            ..Self::fine_grained()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParam(msg));
        if self.batch_size == 0 {
            return fail("batch size must be at least 1".into());
        }
        if self.expansion_multiplier == 0 {
            return fail("expansion multiplier must be at least 1".into());
        }
        if self.strengths.is_empty() {
            return fail("at least one strength is required".into());
        }
        if let Some(s) = self.strengths.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return fail(format!("strength {s} outside [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.replacement_probability) {
            return fail(format!(
                "replacement probability {} outside [0, 1]",
                self.replacement_probability
            ));
        }
        if !(self.smoothing_confidence > 0.0 && self.smoothing_confidence <= 1.0) {
            return fail(format!(
                "smoothing confidence {} outside (0, 1]",
                self.smoothing_confidence
            ));
        }
        if let SaliencySource::SpectralResidual(params) = &self.saliency_source {
            params.validate()?;
        }
        Ok(())
    }

    pub fn multiplier_for_class(&self, class_id: usize) -> usize {
        self.class_multipliers
            .get(&class_id)
            .copied()
            .unwrap_or(self.expansion_multiplier)
    }
}

/// Soft label with `confidence` on `class_id` and the rest spread evenly.
pub fn smooth_label(class_id: usize, class_count: usize, confidence: f64) -> Result<Vec<f64>> {
    if class_count < 2 {
        return Err(Error::InvalidParam(format!(
            "label smoothing needs at least 2 classes, got {class_count}"
        )));
    }
    if class_id >= class_count {
        return Err(Error::InvalidParam(format!(
            "class {class_id} out of range for {class_count} classes"
        )));
    }
    if !(confidence > 1.0 / class_count as f64 && confidence <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "confidence {confidence} must lie in (1/{class_count}, 1]"
        )));
    }
    let rest = (1.0 - confidence) / (class_count - 1) as f64;
    Ok((0..class_count)
        .map(|c| if c == class_id { confidence } else { rest })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    /// Relative to the output directory.
    pub generated_path: PathBuf,
    pub source_entry_id: usize,
    pub target_entry_id: usize,
    pub class_id: usize,
    pub soft_label: Vec<f64>,
    pub strength_used: f64,
    /// `(batch sampling seed, noise seed)`.
    pub seeds: (u64, u64),
    pub l2_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub entry_id: usize,
    pub repetition: usize,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AugmentReport {
    pub records: Vec<ManifestRecord>,
    pub failures: Vec<FailureRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SampleKey {
    pub entry_id: usize,
    pub repetition: usize,
}

/// What an augmentation run would produce, without touching the disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentPlan {
    pub entries: usize,
    pub samples: Vec<SampleKey>,
    pub per_class: BTreeMap<usize, usize>,
}

pub fn plan(index: &DatasetIndex, cfg: &AugmentationConfig) -> AugmentPlan {
    let mut samples = Vec::new();
    let mut per_class = BTreeMap::new();
    for entry in index.entries() {
        let reps = cfg.multiplier_for_class(entry.class_id);
        *per_class.entry(entry.class_id).or_insert(0) += reps;
        samples.extend((0..reps).map(|repetition| SampleKey {
            entry_id: entry.id,
            repetition,
        }));
    }
    AugmentPlan {
        entries: index.len(),
        samples,
        per_class,
    }
}

/// Loads (or computes) every entry's saliency map at its image's resolution.
pub fn prepare_saliency(index: &DatasetIndex, source: &SaliencySource) -> Result<Vec<SaliencyMap>> {
    index
        .entries()
        .par_iter()
        .map(|entry| match source {
            SaliencySource::SpectralResidual(params) => {
                spectral_residual(&load_image(&entry.image)?, params)
            }
            SaliencySource::Ingest => {
                let path = entry.saliency.as_ref().ok_or_else(|| {
                    Error::Index(format!("entry {} has no saliency path", entry.id))
                })?;
                let map = load_saliency(path)?;
                let (w, h) = image::image_dimensions(&entry.image).map_err(|e| Error::Decode {
                    path: entry.image.clone(),
                    reason: e.to_string(),
                })?;
                map.resize_bilinear(w as usize, h as usize)
            }
        })
        .collect()
}

/// Intermediate products of mixing one source with its selected target.
#[derive(Debug, Clone)]
pub struct MixOutcome {
    pub selection: SelectionOutcome,
    pub source_otsu: OtsuResult,
    pub target_otsu: OtsuResult,
    pub mask: BinaryMask,
    pub mixed: Image,
}

/// Target selection, Otsu masks, union and composition for one source.
///
/// `maps[k]` is entry `k`'s saliency map. The target's map and image are
/// resampled to the source's resolution and the target is converted to the
/// source's channel count.
pub fn mix_source(
    index: &DatasetIndex,
    maps: &[SaliencyMap],
    source_id: usize,
    batch_size: usize,
    batch_seed: u64,
) -> Result<MixOutcome> {
    let source_entry = index.entry(source_id).ok_or_else(|| {
        Error::InvalidParam(format!(
            "entry id {source_id} out of range for {} entries",
            index.len()
        ))
    })?;
    let source_map = &maps[source_id];
    let (w, h) = (source_map.width(), source_map.height());

    let batch = sample_target_batch(index, source_id, batch_size, batch_seed)?;
    let candidates = batch
        .iter()
        .map(|&id| Ok((id, maps[id].resize_bilinear(w, h)?)))
        .collect::<Result<Vec<_>>>()?;
    let selection = select_target(source_map, &candidates)?;
    let target_map = candidates
        .into_iter()
        .find(|(id, _)| *id == selection.target_entry_id)
        .map(|(_, m)| m)
        .expect("selected id comes from the candidate list");

    let source_otsu = otsu_threshold(source_map);
    let target_otsu = otsu_threshold(&target_map);
    let mask = union_masks(&source_otsu.mask, &target_otsu.mask)?;

    let source_image = load_image(&source_entry.image)?;
    if (source_image.width(), source_image.height()) != (w, h) {
        return Err(Error::DimensionMismatch(format!(
            "entry {source_id}: saliency {w}x{h} vs image {}x{}",
            source_image.width(),
            source_image.height()
        )));
    }
    let target_entry = &index.entries()[selection.target_entry_id];
    let target_image = load_image(&target_entry.image)?
        .resize_bilinear(w, h)?
        .with_channels(source_image.channels())?;
    let mixed = composite(&mask, &source_image, &target_image)?;

    Ok(MixOutcome {
        selection,
        source_otsu,
        target_otsu,
        mask,
        mixed,
    })
}

/// Draws one strength uniformly from the configured set.
pub fn pick_strength(strengths: &[f64], seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    strengths[rng.random_range(0..strengths.len())]
}

pub fn class_token(class_id: usize) -> String {
    format!("<class_{class_id}>")
}

pub fn generated_file_name(key: SampleKey) -> PathBuf {
    Path::new(IMAGES_DIR).join(format!("{:06}_r{}.png", key.entry_id, key.repetition))
}

/// Shared, read-only state for generating samples.
pub struct Augmenter<'a> {
    index: &'a DatasetIndex,
    cfg: &'a AugmentationConfig,
    maps: Vec<SaliencyMap>,
    refiner: &'a dyn Refiner,
}

/// A generated image with its manifest record.
#[derive(Debug, Clone)]
pub struct GeneratedSample {
    pub key: SampleKey,
    pub image: Image,
    pub record: ManifestRecord,
}

#[derive(Debug)]
pub enum SampleFailure {
    Refine(RefineError),
    Other(Error),
}

impl std::fmt::Display for SampleFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleFailure::Refine(e) => write!(f, "refine/{}: {e}", e.kind()),
            SampleFailure::Other(e) => write!(f, "{e}"),
        }
    }
}

impl<'a> Augmenter<'a> {
    pub fn new(
        index: &'a DatasetIndex,
        cfg: &'a AugmentationConfig,
        refiner: &'a dyn Refiner,
    ) -> Result<Self> {
        cfg.validate()?;
        if index.len() < 2 {
            return Err(Error::NoValidTarget(index.len()));
        }
        if index.class_count() < 2 {
            return Err(Error::Index(format!(
                "label smoothing needs at least 2 classes, index declares {}",
                index.class_count()
            )));
        }
        let maps = prepare_saliency(index, &cfg.saliency_source)?;
        Ok(Self {
            index,
            cfg,
            maps,
            refiner,
        })
    }

    pub fn maps(&self) -> &[SaliencyMap] {
        &self.maps
    }

    /// Generates one sample in memory. Pure in its derived seeds.
    pub fn generate(&self, key: SampleKey) -> std::result::Result<GeneratedSample, SampleFailure> {
        let master = self.cfg.master_seed;
        let batch_seed = derive_seed(master, key.entry_id, key.repetition, SeedStage::Batch);
        let noise_seed = derive_seed(master, key.entry_id, key.repetition, SeedStage::Noise);
        let strength = pick_strength(
            &self.cfg.strengths,
            derive_seed(master, key.entry_id, key.repetition, SeedStage::Strength),
        );

        let mix = mix_source(self.index, &self.maps, key.entry_id, self.cfg.batch_size, batch_seed)
            .map_err(SampleFailure::Other)?;
        let class_id = self.index.entries()[key.entry_id].class_id;
        let prompt = PromptSpec::new(class_token(class_id), self.cfg.metaclass.clone());
        let request = RefineRequest::new(mix.mixed, prompt, strength, noise_seed)
            .map_err(SampleFailure::Refine)?;
        let image = self.refiner.refine(&request).map_err(SampleFailure::Refine)?;

        let soft_label = smooth_label(class_id, self.index.class_count(), self.cfg.smoothing_confidence)
            .map_err(SampleFailure::Other)?;
        let record = ManifestRecord {
            generated_path: generated_file_name(key),
            source_entry_id: key.entry_id,
            target_entry_id: mix.selection.target_entry_id,
            class_id,
            soft_label,
            strength_used: strength,
            seeds: (batch_seed, noise_seed),
            l2_distance: mix.selection.l2_distance,
        };
        Ok(GeneratedSample { key, image, record })
    }

    /// Runs every planned sample on the current rayon pool, writing PNGs,
    /// the manifest and the failures sidecar into `out_dir`.
    pub fn run(&self, out_dir: &Path) -> Result<AugmentReport> {
        let images_dir = out_dir.join(IMAGES_DIR);
        fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;

        let samples = plan(self.index, self.cfg).samples;
        let mut outcomes: Vec<(SampleKey, std::result::Result<ManifestRecord, String>)> = samples
            .par_iter()
            .map(|&key| match self.generate(key) {
                Ok(sample) => {
                    save_image(&sample.image, out_dir.join(&sample.record.generated_path))?;
                    Ok((key, Ok(sample.record)))
                }
                Err(failure) => {
                    log::warn!(
                        "skipping entry {} repetition {}: {failure}",
                        key.entry_id,
                        key.repetition
                    );
                    Ok((key, Err(failure.to_string())))
                }
            })
            .collect::<Result<_>>()?;
        outcomes.sort_by_key(|(key, _)| *key);

        let mut report = AugmentReport::default();
        for (key, outcome) in outcomes {
            match outcome {
                Ok(record) => report.records.push(record),
                Err(error) => report.failures.push(FailureRecord {
                    entry_id: key.entry_id,
                    repetition: key.repetition,
                    error,
                }),
            }
        }
        write_jsonl(&out_dir.join(MANIFEST_FILE), &report.records)?;
        write_jsonl(&out_dir.join(FAILURES_FILE), &report.failures)?;
        Ok(report)
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Augments `index` into `out_dir` with the refiner named in `cfg`, on the
/// global rayon pool.
pub fn augment_dataset(
    index: &DatasetIndex,
    cfg: &AugmentationConfig,
    out_dir: impl AsRef<Path>,
) -> Result<AugmentReport> {
    let refiner = cfg.refiner.build();
    Augmenter::new(index, cfg, refiner.as_ref())?.run(out_dir.as_ref())
}

/// Like [`augment_dataset`] but on a dedicated pool of `workers` threads and
/// with an explicit refiner.
pub fn augment_dataset_with(
    index: &DatasetIndex,
    cfg: &AugmentationConfig,
    refiner: &dyn Refiner,
    out_dir: impl AsRef<Path>,
    workers: usize,
) -> Result<AugmentReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParam(format!("worker pool: {e}")))?;
    let out_dir = out_dir.as_ref();
    pool.install(|| Augmenter::new(index, cfg, refiner)?.run(out_dir))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source", content = "record")]
pub enum SlotSource {
    Real,
    /// Index into the generated record list.
    Generated(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewSlot {
    pub slot: usize,
    #[serde(flatten)]
    pub source: SlotSource,
}

/// One training view over `real_count` slots: each slot is independently
/// replaced, with probability `p`, by a uniformly chosen generated record.
pub fn sample_training_view(
    real_count: usize,
    records: &[ManifestRecord],
    p: f64,
    seed: u64,
) -> Result<Vec<ViewSlot>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParam(format!(
            "replacement probability {p} outside [0, 1]"
        )));
    }
    if p > 0.0 && records.is_empty() {
        return Err(Error::InvalidParam(
            "replacement probability is positive but no generated records exist".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..real_count)
        .map(|slot| {
            let source = if rng.random_bool(p) {
                SlotSource::Generated(rng.random_range(0..records.len()))
            } else {
                SlotSource::Real
            };
            ViewSlot { slot, source }
        })
        .collect())
}
