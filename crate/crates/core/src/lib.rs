//! Saliency-guided, label-preserving image mixing for dataset augmentation.
//!
//! Each source image keeps its salient foreground and borrows the background
//! of the dataset image whose saliency map overlaps it most. The composite is
//! then refined by an image-to-image diffusion backend at a chosen
//! translation strength, and the result inherits the source's label.
//!
//! Module map:
//!
//! - [`imaging`]: raster types and PNG/JPEG I/O
//! - [`saliency`]: MinMax normalization and spectral-residual saliency
//! - [`masking`]: Otsu masks, mask union, composition
//! - [`selection`]: dataset index, target batch sampling, L2 target selection
//! - [`refinement`]: noise schedule, refiner backends, service client
//! - [`pipeline`]: dataset augmentation, manifests, training-view sampling
//! - [`baselines`]: Mixup, CutMix and the Diff-Mix label rule
//! - [`cli`]: the `sgdmix` command line

pub mod baselines;
pub mod cli;
pub mod error;
pub mod imaging;
pub mod masking;
pub mod pipeline;
pub mod refinement;
pub mod saliency;
pub mod selection;

pub use error::{Error, Result};
pub use imaging::{load_image, load_saliency, save_image, save_saliency, BinaryMask, Image, SaliencyMap};
pub use masking::{composite, otsu_threshold, union_masks, OtsuResult};
pub use pipeline::{
    augment_dataset, augment_dataset_with, sample_training_view, smooth_label, AugmentReport,
    AugmentationConfig, ManifestRecord, RefinerChoice, SaliencySource,
};
pub use refinement::{
    forward_noise, IdentityRefiner, NoiseSchedule, NoiseStubRefiner, PromptSpec, RefineError,
    RefineRequest, Refiner, RemoteRefiner,
};
pub use saliency::{normalize_minmax, spectral_residual, SpectralResidualParams};
pub use selection::{sample_target_batch, select_target, DatasetIndex, SelectionOutcome};
