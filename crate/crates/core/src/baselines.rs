//! Reference mixing baselines used for comparisons: Mixup, CutMix and the
//! Diff-Mix label formula. Randomness (lambda, box, strength) is supplied by
//! the caller.

use crate::error::{Error, Result};
use crate::imaging::Image;

/// Label weights for the two mixed inputs, `(first, second)`.
pub type LabelWeights = (f64, f64);

/// Strength used by the side-by-side comparison preset.
pub const COMPARISON_STRENGTH: f64 = 0.7;
pub const DEFAULT_DIFFMIX_GAMMA: f64 = 0.5;

fn check_same_shape(a: &Image, b: &Image) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )))
    }
}

/// Per-pixel `lambda * a + (1 - lambda) * b`, rounded half up.
pub fn mixup(a: &Image, b: &Image, lambda: f64) -> Result<(Image, LabelWeights)> {
    check_same_shape(a, b)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParam(format!("lambda {lambda} outside [0, 1]")));
    }
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let v = lambda * f64::from(x) + (1.0 - lambda) * f64::from(y);
            (v + 0.5).floor().clamp(0.0, 255.0) as u8
        })
        .collect();
    let img = Image::new(a.width(), a.height(), a.channels(), data)?;
    Ok((img, (lambda, 1.0 - lambda)))
}

/// Axis-aligned box in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutBox {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl CutBox {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Self { x, y, width, height }
    }

    pub fn contains(&self, px: usize, py: usize) -> bool {
        px >= self.x && px < self.x + self.width && py >= self.y && py < self.y + self.height
    }
}

/// `a` with the box region replaced by `b`'s; weights follow the box area.
pub fn cutmix(a: &Image, b: &Image, cut: CutBox) -> Result<(Image, LabelWeights)> {
    check_same_shape(a, b)?;
    if cut.x + cut.width > a.width() || cut.y + cut.height > a.height() {
        return Err(Error::InvalidParam(format!(
            "box {cut:?} exceeds {}x{} image",
            a.width(),
            a.height()
        )));
    }
    let channels = a.channels();
    let mut data = a.data().to_vec();
    for y in cut.y..cut.y + cut.height {
        let start = (y * a.width() + cut.x) * channels;
        let end = start + cut.width * channels;
        data[start..end].copy_from_slice(&b.data()[start..end]);
    }
    let ratio = (cut.width * cut.height) as f64 / a.pixel_count() as f64;
    let img = Image::new(a.width(), a.height(), channels, data)?;
    Ok((img, (1.0 - ratio, ratio)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffMixLabelParams {
    pub strength: f64,
    pub gamma: f64,
}

impl DiffMixLabelParams {
    pub fn new(strength: f64, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&strength) {
            return Err(Error::InvalidParam(format!(
                "strength {strength} outside [0, 1]"
            )));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParam(format!("gamma {gamma} must be positive")));
        }
        Ok(Self { strength, gamma })
    }
}

/// `(1 - s^gamma, s^gamma)`: source-class and target-class weights.
pub fn diffmix_label(params: DiffMixLabelParams) -> LabelWeights {
    let target = params.strength.powf(params.gamma);
    (1.0 - target, target)
}
