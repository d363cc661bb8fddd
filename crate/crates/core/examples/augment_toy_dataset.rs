//! End-to-end augmentation of a small synthetic dataset.
//!
//! cargo run --example augment_toy_dataset [-- out_dir]

#[path = "support/mod.rs"]
mod support;

use sgdmix::pipeline::augment_dataset_with;
use sgdmix::{AugmentationConfig, NoiseStubRefiner};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scratch = tempfile::tempdir()?;
    let (_, index) = support::write_toy_dataset(&scratch.path().join("data"), 12, 3, 48, 1);
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| scratch.path().join("out"));

    let cfg = AugmentationConfig {
        expansion_multiplier: 3,
        master_seed: 2024,
        ..AugmentationConfig::fine_grained()
    };
    let report = augment_dataset_with(&index, &cfg, &NoiseStubRefiner::default(), &out, 4)?;
    println!("{} generated, {} failed -> {}", report.records.len(), report.failures.len(), out.display());
    for r in report.records.iter().take(5) {
        println!(
            "  {} src {:2} tgt {:2} class {} s={} label[class]={}",
            r.generated_path.display(),
            r.source_entry_id,
            r.target_entry_id,
            r.class_id,
            r.strength_used,
            r.soft_label[r.class_id]
        );
    }
    Ok(())
}
