//! Reference implementations used as test oracles. They recompute results
//! from scratch by exhaustive search or direct summation and share no code
//! paths with the library beyond its public types.

use std::f64::consts::PI;

use sgdmix::{Image, SaliencyMap};

/// Bin for `v` in [0, 1]: floor(v * 255) with representation slack.
pub fn bin_of(v: f64) -> usize {
    ((v * 255.0 + 1e-9).floor() as i64).clamp(0, 255) as usize
}

/// Tries every threshold t in 0..=255, recounting both classes from the raw
/// pixels each time. Returns (threshold, variance) with the smallest
/// maximizing threshold, or None when every pixel shares one bin.
pub fn brute_force_otsu(values: &[f64]) -> Option<(u8, f64)> {
    let bins: Vec<usize> = values.iter().map(|&v| bin_of(v)).collect();
    if bins.iter().all(|&b| b == bins[0]) {
        return None;
    }
    let total = bins.len() as f64;
    let mut best: Option<(u8, f64)> = None;
    for t in 0..=255usize {
        let (mut n0, mut s0, mut n1, mut s1) = (0u64, 0u64, 0u64, 0u64);
        for &b in &bins {
            if b <= t {
                n0 += 1;
                s0 += b as u64;
            } else {
                n1 += 1;
                s1 += b as u64;
            }
        }
        let variance = if n0 == 0 || n1 == 0 {
            0.0
        } else {
            let w0 = n0 as f64 / total;
            let w1 = n1 as f64 / total;
            let mu0 = s0 as f64 / n0 as f64;
            let mu1 = s1 as f64 / n1 as f64;
            w0 * w1 * (mu0 - mu1) * (mu0 - mu1)
        };
        if best.is_none_or(|(_, v)| variance > v) {
            best = Some((t as u8, variance));
        }
    }
    best
}

/// Full scan: distance to every candidate, then the first index attaining
/// the minimum.
pub fn brute_force_select(source: &SaliencyMap, candidates: &[(usize, SaliencyMap)]) -> (usize, f64) {
    let distances: Vec<f64> = candidates
        .iter()
        .map(|(_, m)| {
            source
                .values()
                .iter()
                .zip(m.values())
                .map(|(a, b)| (a - b).powi(2))
                .sum()
        })
        .collect();
    let min = distances.iter().cloned().fold(f64::INFINITY, f64::min);
    let pos = distances.iter().position(|&d| d == min).unwrap();
    (candidates[pos].0, min)
}

#[derive(Clone, Copy)]
struct C(f64, f64);

impl C {
    fn mul(self, o: C) -> C {
        C(self.0 * o.0 - self.1 * o.1, self.0 * o.1 + self.1 * o.0)
    }
    fn add(self, o: C) -> C {
        C(self.0 + o.0, self.1 + o.1)
    }
}

/// Direct O(n^2) DFT along one axis of an n x n grid. `sign` is -1 forward, +1 inverse.
fn dft_axis(grid: &[C], n: usize, rows: bool, sign: f64) -> Vec<C> {
    let mut out = vec![C(0.0, 0.0); n * n];
    for line in 0..n {
        for k in 0..n {
            let mut acc = C(0.0, 0.0);
            for j in 0..n {
                let angle = sign * 2.0 * PI * (k * j % n) as f64 / n as f64;
                let idx = if rows { line * n + j } else { j * n + line };
                acc = acc.add(grid[idx].mul(C(angle.cos(), angle.sin())));
            }
            let idx = if rows { line * n + k } else { k * n + line };
            out[idx] = acc;
        }
    }
    out
}

fn dft2(grid: &[C], n: usize, sign: f64) -> Vec<C> {
    let rows = dft_axis(grid, n, true, sign);
    dft_axis(&rows, n, false, sign)
}

fn clamp(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Spectral-residual saliency for a square image whose edge equals the
/// working resolution (so no resampling is involved): direct DFT,
/// log amplitude minus its 3x3 replicate-border mean, inverse DFT with the
/// original phase, squared magnitude, direct 2-D Gaussian (radius ceil(3
/// sigma), replicate border), MinMax.
pub fn reference_spectral_residual(img: &Image, sigma: f64) -> Vec<f64> {
    let n = img.width();
    assert_eq!(n, img.height(), "oracle handles square images only");
    let gray: Vec<f64> = (0..n * n)
        .map(|i| {
            let p = &img.data()[i * img.channels()..(i + 1) * img.channels()];
            let l = if p.len() == 1 {
                f64::from(p[0])
            } else {
                0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])
            };
            l / 255.0
        })
        .collect();
    if gray.iter().all(|&v| v == gray[0]) {
        return vec![0.0; n * n];
    }
    let spectrum = dft2(&gray.iter().map(|&v| C(v, 0.0)).collect::<Vec<_>>(), n, -1.0);
    let log_amp: Vec<f64> = spectrum
        .iter()
        .map(|c| (c.0 * c.0 + c.1 * c.1).sqrt().max(1e-12).ln())
        .collect();
    let mut residual_spectrum = vec![C(0.0, 0.0); n * n];
    for y in 0..n {
        for x in 0..n {
            let mut sum = 0.0;
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    sum += log_amp[clamp(y as isize + dy, n) * n + clamp(x as isize + dx, n)];
                }
            }
            let i = y * n + x;
            let residual = log_amp[i] - sum / 9.0;
            let phase = spectrum[i].1.atan2(spectrum[i].0);
            let mag = residual.exp();
            residual_spectrum[i] = C(mag * phase.cos(), mag * phase.sin());
        }
    }
    let back = dft2(&residual_spectrum, n, 1.0);
    let norm = (n * n) as f64;
    let energy: Vec<f64> = back
        .iter()
        .map(|c| (c.0 / norm).powi(2) + (c.1 / norm).powi(2))
        .collect();

    let radius = (3.0 * sigma).ceil() as isize;
    let mut weights = Vec::new();
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            weights.push(((dx, dy), (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp()));
        }
    }
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    let mut smoothed = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            smoothed[y * n + x] = weights
                .iter()
                .map(|((dx, dy), w)| {
                    w / total * energy[clamp(y as isize + dy, n) * n + clamp(x as isize + dx, n)]
                })
                .sum();
        }
    }
    let min = smoothed.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = smoothed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    smoothed.iter().map(|v| (v - min) / (max - min)).collect()
}
