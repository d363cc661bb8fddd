//! Synthetic data shared by the examples.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgdmix::{save_image, save_saliency, DatasetIndex, Image, SaliencyMap};

/// Gray noise with one bright square. Returns the blob's top-left corner too.
pub fn blob_image(size: usize, blob: usize, seed: u64) -> (Image, (usize, usize)) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bx = rng.random_range(0..size - blob);
    let by = rng.random_range(0..size - blob);
    let mut data: Vec<u8> = (0..size * size).map(|_| rng.random_range(0..100)).collect();
    for y in by..by + blob {
        data[y * size + bx..y * size + bx + blob].fill(255);
    }
    (Image::new(size, size, 1, data).unwrap(), (bx, by))
}

/// Soft disc saliency centred at `(cx, cy)`.
pub fn disc_map(size: usize, cx: f64, cy: f64, radius: f64) -> SaliencyMap {
    let values = (0..size * size)
        .map(|i| {
            let (x, y) = ((i % size) as f64, (i / size) as f64);
            let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
            (1.0 - d / (2.0 * radius)).clamp(0.0, 1.0)
        })
        .collect();
    SaliencyMap::new(size, size, values).unwrap()
}

/// Writes `m` RGB disc images with matching saliency files and an
/// `index.json` under `dir`. Classes are assigned round-robin.
pub fn write_toy_dataset(dir: &Path, m: usize, classes: usize, size: usize, seed: u64) -> (PathBuf, DatasetIndex) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::fs::create_dir_all(dir.join("images")).unwrap();
    std::fs::create_dir_all(dir.join("saliency")).unwrap();
    let mut entries = Vec::new();
    for i in 0..m {
        let s = size as f64;
        let (cx, cy) = (rng.random_range(0.3 * s..0.7 * s), rng.random_range(0.3 * s..0.7 * s));
        let radius = rng.random_range(0.15 * s..0.3 * s);
        let fg: [u8; 3] = rng.random();
        let bg: [u8; 3] = rng.random();
        let map = disc_map(size, cx, cy, radius);
        let pixels = map
            .values()
            .iter()
            .flat_map(|&v| if v > 0.5 { fg } else { bg })
            .collect();
        let image = dir.join(format!("images/{i:03}.png"));
        let saliency = dir.join(format!("saliency/{i:03}.png"));
        save_image(&Image::new(size, size, 3, pixels).unwrap(), &image).unwrap();
        save_saliency(&map, &saliency).unwrap();
        entries.push((image, Some(saliency), i % classes));
    }
    let names = (0..classes).map(|c| format!("species_{c}")).collect();
    let index = DatasetIndex::new(names, entries).unwrap();
    let path = dir.join("index.json");
    index.save(&path).unwrap();
    (path, index)
}
