//! How much the noise stub perturbs an image at each strength.
//!
//! cargo run --example noise_strength

use sgdmix::{forward_noise, Image, NoiseSchedule};

fn main() -> sgdmix::Result<()> {
    let schedule = NoiseSchedule::default();
    let img = Image::filled(64, 64, &[128, 96, 200])?;
    println!("strength  steps  alpha_bar  mean |delta|");
    for s in [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
        let steps = schedule.steps_for_strength(s);
        let out = forward_noise(&img, s, &schedule, 11);
        let delta = img
            .data()
            .iter()
            .zip(out.data())
            .map(|(&a, &b)| (f64::from(a) - f64::from(b)).abs())
            .sum::<f64>()
            / img.data().len() as f64;
        println!("{s:8.1}  {steps:5}  {:9.5}  {delta:12.2}", schedule.alpha_bar(steps));
    }
    Ok(())
}
