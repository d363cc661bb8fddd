//! Saliency-guided mixing of one source image with its selected target.
//!
//! cargo run --example mix_pair [-- out_dir]

#[path = "support/mod.rs"]
mod support;

use sgdmix::pipeline::{mix_source, prepare_saliency};
use sgdmix::{save_image, SaliencySource};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = tempfile::tempdir()?;
    let (_, index) = support::write_toy_dataset(data.path(), 8, 2, 48, 7);
    let maps = prepare_saliency(&index, &SaliencySource::Ingest)?;

    let outcome = mix_source(&index, &maps, 0, 50, 1)?;
    println!("candidates {:?}", outcome.selection.candidate_ids);
    println!(
        "target {} (squared L2 {:.2}), thresholds {} / {}",
        outcome.selection.target_entry_id,
        outcome.selection.l2_distance,
        outcome.source_otsu.threshold,
        outcome.target_otsu.threshold
    );
    println!("kept {} of {} source pixels", outcome.mask.count_foreground(), outcome.mask.bits().len());

    if let Some(dir) = std::env::args().nth(1) {
        let dir = std::path::Path::new(&dir);
        save_image(&outcome.mixed, dir.join("mixed.png"))?;
        save_image(&outcome.mask.to_image(), dir.join("mask.png"))?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
