//! Otsu foreground masks, mask union and hard pixel-wise composition.

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, Image, SaliencyMap};

pub const HISTOGRAM_BINS: usize = 256;

// Absorbs representation error so that k/255 lands in bin k.
const QUANTIZE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OtsuResult {
    /// Histogram bin index; foreground is every bin strictly above it.
    pub threshold: u8,
    pub mask: BinaryMask,
    pub between_class_variance: f64,
    /// Set when every pixel fell in one bin. The mask is then all foreground.
    pub degenerate: bool,
}

/// Maps a saliency value in [0, 1] to one of 256 bins; 1.0 goes to bin 255.
pub fn quantize(value: f64) -> u8 {
    (value * 255.0 + QUANTIZE_SLACK).floor().clamp(0.0, 255.0) as u8
}

pub fn histogram(map: &SaliencyMap) -> [u64; HISTOGRAM_BINS] {
    let mut hist = [0u64; HISTOGRAM_BINS];
    for &v in map.values() {
        hist[quantize(v) as usize] += 1;
    }
    hist
}

/// Between-class variance `w0 * w1 * (mu0 - mu1)^2` of a two-class split given
/// per-class pixel counts and bin-index sums. Empty classes give 0.
pub(crate) fn between_class_variance(n0: u64, s0: u64, n1: u64, s1: u64) -> f64 {
    if n0 == 0 || n1 == 0 {
        return 0.0;
    }
    let total = (n0 + n1) as f64;
    let w0 = n0 as f64 / total;
    let w1 = n1 as f64 / total;
    let mu0 = s0 as f64 / n0 as f64;
    let mu1 = s1 as f64 / n1 as f64;
    w0 * w1 * (mu0 - mu1) * (mu0 - mu1)
}

/// Otsu's threshold over the 256-bin histogram of `map`.
///
/// Ties are broken toward the smallest threshold. A map whose pixels all land
/// in a single bin yields an all-foreground mask with `degenerate` set.
pub fn otsu_threshold(map: &SaliencyMap) -> OtsuResult {
    let hist = histogram(map);
    let occupied: Vec<usize> = (0..HISTOGRAM_BINS).filter(|&b| hist[b] > 0).collect();
    if occupied.len() <= 1 {
        let bin = occupied.first().copied().unwrap_or(0) as u8;
        log::warn!("saliency map falls in a single histogram bin ({bin}); keeping all pixels as foreground");
        return OtsuResult {
            threshold: bin,
            mask: BinaryMask::filled(map.width(), map.height(), true),
            between_class_variance: 0.0,
            degenerate: true,
        };
    }

    let count: u64 = hist.iter().sum();
    let weighted: u64 = hist.iter().enumerate().map(|(b, &h)| b as u64 * h).sum();
    let mut n0 = 0u64;
    let mut s0 = 0u64;
    let mut best_threshold = 0u8;
    let mut best_variance = f64::NEG_INFINITY;
    for (bin, &h) in hist.iter().enumerate() {
        n0 += h;
        s0 += bin as u64 * h;
        let variance = between_class_variance(n0, s0, count - n0, weighted - s0);
        if variance > best_variance {
            best_variance = variance;
            best_threshold = bin as u8;
        }
    }

    OtsuResult {
        threshold: best_threshold,
        mask: threshold_mask(map, best_threshold),
        between_class_variance: best_variance,
        degenerate: false,
    }
}

/// Foreground where the quantized value is strictly above `threshold`.
pub fn threshold_mask(map: &SaliencyMap, threshold: u8) -> BinaryMask {
    let bits = map
        .values()
        .iter()
        .map(|&v| quantize(v) > threshold)
        .collect();
    BinaryMask::new(map.width(), map.height(), bits).expect("one bit per saliency value")
}

pub fn union_masks(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(format!(
            "mask union of {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let bits = a.bits().iter().zip(b.bits()).map(|(&x, &y)| x || y).collect();
    BinaryMask::new(a.width(), a.height(), bits)
}

/// Takes `source` where the mask is set and `target` elsewhere. No blending.
pub fn composite(mask: &BinaryMask, source: &Image, target: &Image) -> Result<Image> {
    if !source.same_shape(target) {
        return Err(Error::DimensionMismatch(format!(
            "source {}x{}x{} vs target {}x{}x{}",
            source.width(),
            source.height(),
            source.channels(),
            target.width(),
            target.height(),
            target.channels()
        )));
    }
    if mask.width() != source.width() || mask.height() != source.height() {
        return Err(Error::DimensionMismatch(format!(
            "mask {}x{} vs image {}x{}",
            mask.width(),
            mask.height(),
            source.width(),
            source.height()
        )));
    }
    let channels = source.channels();
    let data = mask
        .bits()
        .iter()
        .zip(source.data().chunks_exact(channels))
        .zip(target.data().chunks_exact(channels))
        .flat_map(|((&fg, s), t)| if fg { s } else { t })
        .copied()
        .collect();
    Image::new(source.width(), source.height(), channels, data)
}
