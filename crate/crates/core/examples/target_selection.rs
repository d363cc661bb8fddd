//! Batch sampling and nearest-saliency target selection.
//!
//! cargo run --example target_selection

#[path = "support/mod.rs"]
mod support;

use sgdmix::{sample_target_batch, select_target, DatasetIndex};

fn main() -> sgdmix::Result<()> {
    // Selection only needs ids and maps, so the paths here never get opened.
    let maps: Vec<_> = (0..12)
        .map(|i| support::disc_map(32, 8.0 + 1.5 * i as f64, 16.0, 6.0))
        .collect();
    let index = DatasetIndex::new(
        vec!["a".into(), "b".into()],
        (0..maps.len()).map(|i| (format!("{i}.png").into(), None, i % 2)),
    )?;

    let source = 5;
    let batch = sample_target_batch(&index, source, 6, 42)?;
    let candidates: Vec<_> = batch.iter().map(|&id| (id, maps[id].clone())).collect();
    let outcome = select_target(&maps[source], &candidates)?;
    println!("source {source}, batch {batch:?}");
    println!("target {} at squared L2 {:.3}", outcome.target_entry_id, outcome.l2_distance);
    Ok(())
}
