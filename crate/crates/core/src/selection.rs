//! Target selection: sample a candidate batch from the dataset (excluding the
//! source) and keep the candidate whose saliency map is closest in squared L2.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::SaliencyMap;

/// Batch size used when none is configured.
pub const DEFAULT_BATCH_SIZE: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub id: usize,
    pub image: PathBuf,
    pub saliency: Option<PathBuf>,
    pub class_id: usize,
}

/// Ordered image/saliency pairs with class labels. Entry ids are positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetIndex {
    classes: Vec<String>,
    entries: Vec<DatasetEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexFile {
    classes: Vec<String>,
    entries: Vec<IndexFileEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexFileEntry {
    image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    saliency: Option<PathBuf>,
    class: usize,
}

impl DatasetIndex {
    /// `entries` holds `(image, saliency, class_id)`; ids are assigned in order.
    pub fn new(
        classes: Vec<String>,
        entries: impl IntoIterator<Item = (PathBuf, Option<PathBuf>, usize)>,
    ) -> Result<Self> {
        let entries: Vec<DatasetEntry> = entries
            .into_iter()
            .enumerate()
            .map(|(id, (image, saliency, class_id))| DatasetEntry {
                id,
                image,
                saliency,
                class_id,
            })
            .collect();
        if let Some(bad) = entries.iter().find(|e| e.class_id >= classes.len()) {
            return Err(Error::Index(format!(
                "entry {} has class {} but only {} classes are declared",
                bad.id,
                bad.class_id,
                classes.len()
            )));
        }
        Ok(Self { classes, entries })
    }

    /// Loads `{"classes": [...], "entries": [{"image", "saliency", "class"}]}`.
    /// Relative paths are resolved against the index file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: IndexFile = serde_json::from_str(&text)
            .map_err(|e| Error::Index(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        Self::new(
            file.classes,
            file.entries.into_iter().map(|e| {
                (
                    base.join(e.image),
                    e.saliency.map(|s| base.join(s)),
                    e.class,
                )
            }),
        )
    }

    /// Writes the index with paths made relative to `path`'s directory where possible.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        let rel = |p: &Path| p.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf());
        let file = IndexFile {
            classes: self.classes.clone(),
            entries: self
                .entries
                .iter()
                .map(|e| IndexFileEntry {
                    image: rel(&e.image),
                    saliency: e.saliency.as_deref().map(rel),
                    class: e.class_id,
                })
                .collect(),
        };
        let text = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn entries(&self) -> &[DatasetEntry] {
        &self.entries
    }

    pub fn entry(&self, id: usize) -> Option<&DatasetEntry> {
        self.entries.get(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub target_entry_id: usize,
    pub l2_distance: f64,
    pub candidate_ids: Vec<usize>,
}

/// Draws `min(n, m - 1)` distinct entry ids uniformly without replacement from
/// every entry except `source_id`. Class-agnostic and deterministic per seed.
pub fn sample_target_batch(
    index: &DatasetIndex,
    source_id: usize,
    n: usize,
    rng_seed: u64,
) -> Result<Vec<usize>> {
    let m = index.len();
    if m < 2 {
        return Err(Error::NoValidTarget(m));
    }
    if source_id >= m {
        return Err(Error::InvalidParam(format!(
            "source id {source_id} out of range for {m} entries"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParam("batch size must be at least 1".into()));
    }
    let pool = m - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(rand::seq::index::sample(&mut rng, pool, n.min(pool))
        .into_iter()
        .map(|i| if i >= source_id { i + 1 } else { i })
        .collect())
}

/// Squared L2 distance summed over pixels (not averaged).
pub fn squared_l2(a: &SaliencyMap, b: &SaliencyMap) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(format!(
            "saliency {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum())
}

/// Picks the candidate minimizing squared L2 to `source_map`; the earliest
/// list position wins ties. Candidate maps must already match the source's
/// dimensions.
pub fn select_target(
    source_map: &SaliencyMap,
    candidates: &[(usize, SaliencyMap)],
) -> Result<SelectionOutcome> {
    let mut best: Option<(usize, f64)> = None;
    for (id, map) in candidates {
        let distance = squared_l2(source_map, map)?;
        if best.is_none_or(|(_, d)| distance < d) {
            best = Some((*id, distance));
        }
    }
    let (target_entry_id, l2_distance) = best.ok_or(Error::EmptyCandidates)?;
    Ok(SelectionOutcome {
        target_entry_id,
        l2_distance,
        candidate_ids: candidates.iter().map(|(id, _)| *id).collect(),
    })
}
