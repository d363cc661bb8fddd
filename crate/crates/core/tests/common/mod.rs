#![allow(dead_code)]

pub mod oracles;
pub mod stub_service;

use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgdmix::{save_image, DatasetIndex, Image, SaliencyMap};

/// Writes a 16-bit saliency PNG without going through the library.
pub fn write_saliency_raw(path: &Path, width: usize, height: usize, raw: Vec<u16>) {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width as u32, height as u32, raw).unwrap();
    buf.save_with_format(path, image::ImageFormat::Png).unwrap();
}

/// A `size x size` gray image of uniform noise in `[0, noise_max)` with one
/// bright square blob. Returns the image and the blob's top-left corner.
pub fn blob_on_noise(size: usize, blob: usize, noise_max: u8, seed: u64) -> (Image, (usize, usize)) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bx = rng.random_range(4..size - blob - 4);
    let by = rng.random_range(4..size - blob - 4);
    let mut data: Vec<u8> = (0..size * size).map(|_| rng.random_range(0..noise_max)).collect();
    for y in by..by + blob {
        for x in bx..bx + blob {
            data[y * size + x] = 255;
        }
    }
    (Image::new(size, size, 1, data).unwrap(), (bx, by))
}

pub fn inside_outside_means(map: &SaliencyMap, corner: (usize, usize), blob: usize) -> (f64, f64) {
    let (mut inside, mut n_in, mut outside, mut n_out) = (0.0, 0usize, 0.0, 0usize);
    for y in 0..map.height() {
        for x in 0..map.width() {
            let v = map.get(x, y);
            if x >= corner.0 && x < corner.0 + blob && y >= corner.1 && y < corner.1 + blob {
                inside += v;
                n_in += 1;
            } else {
                outside += v;
                n_out += 1;
            }
        }
    }
    (inside / n_in as f64, outside / n_out as f64)
}

/// Toy dataset: `m` RGB images of `size x size`, `classes` classes assigned
/// round-robin. Each image is a colored disc on a colored background and
/// its saliency map is a soft disc at the same place.
pub fn toy_dataset(dir: &Path, m: usize, classes: usize, size: usize, seed: u64) -> (PathBuf, DatasetIndex) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::fs::create_dir_all(dir.join("images")).unwrap();
    std::fs::create_dir_all(dir.join("saliency")).unwrap();
    let mut entries = Vec::new();
    for i in 0..m {
        let cx = rng.random_range(size as f64 * 0.3..size as f64 * 0.7);
        let cy = rng.random_range(size as f64 * 0.3..size as f64 * 0.7);
        let radius = rng.random_range(size as f64 * 0.15..size as f64 * 0.3);
        let fg: [u8; 3] = [rng.random(), rng.random(), rng.random()];
        let bg: [u8; 3] = [rng.random(), rng.random(), rng.random()];
        let mut pixels = Vec::with_capacity(size * size * 3);
        let mut raw = Vec::with_capacity(size * size);
        for y in 0..size {
            for x in 0..size {
                let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                let jitter: u8 = rng.random_range(0..8);
                let color = if d < radius { fg } else { bg };
                pixels.extend(color.iter().map(|c| c.saturating_add(jitter)));
                let s = (1.0 - (d / (2.0 * radius))).clamp(0.0, 1.0);
                raw.push((s * 65535.0).round() as u16);
            }
        }
        let image_rel = PathBuf::from(format!("images/{i:03}.png"));
        let sal_rel = PathBuf::from(format!("saliency/{i:03}.png"));
        save_image(&Image::new(size, size, 3, pixels).unwrap(), dir.join(&image_rel)).unwrap();
        write_saliency_raw(&dir.join(&sal_rel), size, size, raw);
        entries.push((dir.join(image_rel), Some(dir.join(sal_rel)), i % classes));
    }
    let names = (0..classes).map(|c| format!("class{c}")).collect();
    let index = DatasetIndex::new(names, entries).unwrap();
    let path = dir.join("index.json");
    index.save(&path).unwrap();
    let loaded = DatasetIndex::load(&path).unwrap();
    (path, loaded)
}

/// Relative path -> bytes for every file below `root`.
pub fn tree_contents(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}
