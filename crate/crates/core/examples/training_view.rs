//! Per-epoch replacement of real samples by generated ones.
//!
//! cargo run --example training_view

use sgdmix::{sample_training_view, ManifestRecord};
use sgdmix::pipeline::SlotSource;

fn main() -> sgdmix::Result<()> {
    let records: Vec<ManifestRecord> = (0..4)
        .map(|i| ManifestRecord {
            generated_path: format!("images/{i:06}_r0.png").into(),
            source_entry_id: i,
            target_entry_id: (i + 1) % 4,
            class_id: i % 2,
            soft_label: vec![0.9, 0.1],
            strength_used: 0.7,
            seeds: (0, 0),
            l2_distance: 0.0,
        })
        .collect();
    for epoch in 0..3 {
        let view = sample_training_view(1_000, &records, 0.1, epoch)?;
        let replaced = view
            .iter()
            .filter(|s| matches!(s.source, SlotSource::Generated(_)))
            .count();
        println!("epoch {epoch}: {replaced} of {} slots use generated images", view.len());
    }
    Ok(())
}
