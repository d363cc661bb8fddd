//! Saliency normalization and spectral-residual saliency.
//!
//! The spectral residual is the log-amplitude spectrum minus its local
//! average. Transforming that residual back with the original phase yields a
//! map that lights up regions which do not follow the image's statistical
//! regularities.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::imaging::{resample_bilinear, Image, SaliencyMap};

/// Smallest edge (input and working resolution) the procedure accepts.
pub const MIN_EDGE: usize = 8;

const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralResidualParams {
    /// Working resolution; the image is resampled to a square of this edge.
    pub resize_edge: usize,
    /// Side of the box filter applied to the log-amplitude spectrum. Odd.
    pub avg_filter_size: usize,
    /// Std of the Gaussian applied to the squared-magnitude map, in working pixels.
    pub smooth_sigma: f64,
}

impl Default for SpectralResidualParams {
    fn default() -> Self {
        Self {
            resize_edge: 64,
            avg_filter_size: 3,
            smooth_sigma: 2.5,
        }
    }
}

impl SpectralResidualParams {
    pub fn validate(&self) -> Result<()> {
        if self.resize_edge < MIN_EDGE {
            return Err(Error::InvalidParam(format!(
                "resize_edge {} must be at least {MIN_EDGE}",
                self.resize_edge
            )));
        }
        if self.avg_filter_size == 0 || self.avg_filter_size.is_multiple_of(2) {
            return Err(Error::InvalidParam(format!(
                "avg_filter_size {} must be odd and >= 1",
                self.avg_filter_size
            )));
        }
        if !(self.smooth_sigma > 0.0 && self.smooth_sigma.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "smooth_sigma {} must be positive",
                self.smooth_sigma
            )));
        }
        Ok(())
    }
}

/// `(v - min) / (max - min)` elementwise over arbitrary floats, or `None` when
/// every value is equal.
pub fn minmax_scaled(values: &[f64]) -> Option<Vec<f64>> {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if max.partial_cmp(&min) != Some(std::cmp::Ordering::Greater) {
        return None;
    }
    let range = max - min;
    Some(
        values
            .iter()
            .map(|&v| ((v - min) / range).clamp(0.0, 1.0))
            .collect(),
    )
}

/// MinMax-normalizes a map. Constant maps are returned unchanged.
pub fn normalize_minmax(map: &SaliencyMap) -> SaliencyMap {
    match minmax_scaled(map.values()) {
        Some(values) => SaliencyMap::from_values_unchecked(map.width(), map.height(), values),
        None => map.clone(),
    }
}

/// Normalizes a non-negative plane to [0, 1]; constant planes become zeros.
fn plane_to_map(width: usize, height: usize, plane: Vec<f64>) -> SaliencyMap {
    let values = minmax_scaled(&plane).unwrap_or_else(|| vec![0.0; plane.len()]);
    SaliencyMap::from_values_unchecked(width, height, values)
}

/// Spectral-residual saliency at the input image's resolution.
///
/// A constant image has no residual structure and maps to an all-zero map.
pub fn spectral_residual(img: &Image, params: &SpectralResidualParams) -> Result<SaliencyMap> {
    params.validate()?;
    let (width, height) = (img.width(), img.height());
    if width < MIN_EDGE || height < MIN_EDGE {
        return Err(Error::InvalidImage(format!(
            "spectral residual needs at least {MIN_EDGE}x{MIN_EDGE}, got {width}x{height}"
        )));
    }
    let edge = params.resize_edge;
    let gray: Vec<f64> = img.luma().into_iter().map(|v| v / 255.0).collect();
    let working = resample_bilinear(&gray, width, height, edge, edge);

    let first = working[0];
    if working.iter().all(|&v| v == first) {
        return SaliencyMap::constant(width, height, 0.0);
    }

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(edge);
    let inverse = planner.plan_fft_inverse(edge);

    let mut spectrum: Vec<Complex<f64>> =
        working.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_2d(&mut spectrum, edge, forward.as_ref());

    let log_amplitude: Vec<f64> = spectrum
        .iter()
        .map(|c| c.norm().max(LOG_FLOOR).ln())
        .collect();
    let averaged = box_filter(&log_amplitude, edge, edge, params.avg_filter_size);

    for ((c, &log_amp), &avg) in spectrum.iter_mut().zip(&log_amplitude).zip(&averaged) {
        let phase = c.arg();
        *c = Complex::from_polar((log_amp - avg).exp(), phase);
    }
    fft_2d(&mut spectrum, edge, inverse.as_ref());

    let scale = 1.0 / (edge * edge) as f64;
    let energy: Vec<f64> = spectrum.iter().map(|c| (c * scale).norm_sqr()).collect();
    let smoothed = gaussian_blur(&energy, edge, edge, params.smooth_sigma);
    let upscaled = resample_bilinear(&smoothed, edge, edge, width, height);
    Ok(plane_to_map(width, height, upscaled))
}

/// In-place 2-D transform of a square `edge x edge` buffer: rows, then columns.
fn fft_2d(buf: &mut [Complex<f64>], edge: usize, fft: &dyn Fft<f64>) {
    for row in buf.chunks_exact_mut(edge) {
        fft.process(row);
    }
    let mut column = vec![Complex::new(0.0, 0.0); edge];
    for x in 0..edge {
        for (y, slot) in column.iter_mut().enumerate() {
            *slot = buf[y * edge + x];
        }
        fft.process(&mut column);
        for (y, value) in column.iter().enumerate() {
            buf[y * edge + x] = *value;
        }
    }
}

fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Mean over a `size x size` window with replicated borders.
fn box_filter(src: &[f64], width: usize, height: usize, size: usize) -> Vec<f64> {
    let radius = (size / 2) as isize;
    let norm = (size * size) as f64;
    let mut out = Vec::with_capacity(src.len());
    for y in 0..height as isize {
        for x in 0..width as isize {
            let mut sum = 0.0;
            for dy in -radius..=radius {
                let row = clamp_index(y + dy, height) * width;
                for dx in -radius..=radius {
                    sum += src[row + clamp_index(x + dx, width)];
                }
            }
            out.push(sum / norm);
        }
    }
    out
}

/// Separable Gaussian blur, kernel radius `ceil(3 sigma)`, replicated borders.
fn gaussian_blur(src: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let mut horizontal = vec![0.0; src.len()];
    for y in 0..height {
        for x in 0..width as isize {
            horizontal[y * width + x as usize] = kernel
                .iter()
                .zip(-radius..=radius)
                .map(|(k, d)| k * src[y * width + clamp_index(x + d, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..height as isize {
        for x in 0..width {
            out[y as usize * width + x] = kernel
                .iter()
                .zip(-radius..=radius)
                .map(|(k, d)| k * horizontal[clamp_index(y + d, height) * width + x])
                .sum();
        }
    }
    out
}
