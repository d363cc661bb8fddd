//! Otsu thresholds on two saliency maps and their union mask.
//!
//! cargo run --example otsu_masks

#[path = "support/mod.rs"]
mod support;

use sgdmix::{otsu_threshold, union_masks};

fn main() -> sgdmix::Result<()> {
    let a = support::disc_map(48, 16.0, 20.0, 8.0);
    let b = support::disc_map(48, 30.0, 28.0, 10.0);
    let (ta, tb) = (otsu_threshold(&a), otsu_threshold(&b));
    let union = union_masks(&ta.mask, &tb.mask)?;
    let total = union.bits().len();
    for (name, r) in [("a", &ta), ("b", &tb)] {
        println!(
            "{name}: threshold {:3}  variance {:9.2}  foreground {:4}/{total}",
            r.threshold,
            r.between_class_variance,
            r.mask.count_foreground()
        );
    }
    println!("union foreground {}/{total}", union.count_foreground());

    let flat = otsu_threshold(&sgdmix::SaliencyMap::constant(8, 8, 0.4)?);
    println!("constant map: degenerate={} foreground {}", flat.degenerate, flat.mask.count_foreground());
    Ok(())
}
