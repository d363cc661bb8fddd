//! Label weights of the comparison baselines next to the smoothed label.
//!
//! cargo run --example baselines_compare

use sgdmix::baselines::{cutmix, diffmix_label, mixup, CutBox, DiffMixLabelParams, COMPARISON_STRENGTH};
use sgdmix::{smooth_label, Image};

fn main() -> sgdmix::Result<()> {
    let a = Image::filled(32, 32, &[200, 40, 40])?;
    let b = Image::filled(32, 32, &[40, 40, 200])?;

    let (mixed, w) = mixup(&a, &b, 0.7)?;
    println!("mixup   lambda 0.7: weights ({:.2}, {:.2}), pixel {:?}", w.0, w.1, mixed.pixel(0, 0));
    let (_, w) = cutmix(&a, &b, CutBox::new(8, 8, 16, 16))?;
    println!("cutmix  16x16 box:  weights ({:.2}, {:.2})", w.0, w.1);
    for gamma in [0.5, 1.0, 2.0] {
        let w = diffmix_label(DiffMixLabelParams::new(COMPARISON_STRENGTH, gamma)?);
        println!("diffmix s={COMPARISON_STRENGTH} gamma={gamma}: weights ({:.5}, {:.5})", w.0, w.1);
    }
    let label = smooth_label(1, 4, 0.9)?;
    println!("sgd-mix soft label, class 1 of 4: {:.4?}", label);
    Ok(())
}
