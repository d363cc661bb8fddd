//! Spectral residual saliency on a synthetic blob image.
//!
//! cargo run --example spectral_saliency [-- out_dir]

#[path = "support/mod.rs"]
mod support;

use sgdmix::{save_image, save_saliency, spectral_residual, SpectralResidualParams};

fn main() -> sgdmix::Result<()> {
    let (img, (bx, by)) = support::blob_image(96, 10, 3);
    let map = spectral_residual(&img, &SpectralResidualParams::default())?;

    let (mut inside, mut outside) = (Vec::new(), Vec::new());
    for y in 0..map.height() {
        for x in 0..map.width() {
            let hit = (bx..bx + 10).contains(&x) && (by..by + 10).contains(&y);
            if hit { &mut inside } else { &mut outside }.push(map.get(x, y));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("blob at ({bx}, {by})");
    println!("mean saliency inside {:.3}, outside {:.3}", mean(&inside), mean(&outside));

    if let Some(dir) = std::env::args().nth(1) {
        let dir = std::path::Path::new(&dir);
        save_image(&img, dir.join("blob.png"))?;
        save_saliency(&map, dir.join("blob.saliency.png"))?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
