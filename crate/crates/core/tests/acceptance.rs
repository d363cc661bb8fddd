//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! cargo test -p sgdmix --test acceptance

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::oracles::{bin_of, brute_force_otsu, brute_force_select};
use common::stub_service::{spawn, Behavior};
use common::{blob_on_noise, inside_outside_means, toy_dataset, tree_contents};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgdmix::baselines::{diffmix_label, DiffMixLabelParams};
use sgdmix::pipeline::{augment_dataset_with, SlotSource};
use sgdmix::refinement::{forward_noise, forward_noise_samples, refine_remote, to_unit_range};
use sgdmix::{
    augment_dataset, composite, otsu_threshold, sample_training_view, select_target,
    spectral_residual, AugmentationConfig, BinaryMask, IdentityRefiner, Image, ManifestRecord,
    NoiseSchedule, PromptSpec, RefineRequest, RemoteRefiner, SaliencyMap, SpectralResidualParams,
};
use tempfile::tempdir;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_map(rng: &mut ChaCha8Rng, kind: usize) -> Vec<f64> {
    const N: usize = 64 * 64;
    match kind {
        0 => (0..N).map(|_| rng.random::<f64>()).collect(),
        1 => {
            let lo: f64 = rng.random_range(0.0..0.4);
            let hi = rng.random_range(0.6..1.0);
            let spread = rng.random_range(0.0..0.1);
            let frac = rng.random_range(0.05..0.95);
            (0..N)
                .map(|_| {
                    let centre = if rng.random_bool(frac) { hi } else { lo };
                    (centre + rng.random_range(-spread..=spread)).clamp(0.0, 1.0)
                })
                .collect()
        }
        _ => vec![rng.random::<f64>(); N],
    }
}

fn otsu_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0755);
    let mut elapsed = Duration::ZERO;
    let mut degenerate = 0;
    for case in 0..1000 {
        let values = random_map(&mut rng, case % 3);
        let map = SaliencyMap::new(64, 64, values.clone()).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let out = otsu_threshold(&map);
        elapsed += start.elapsed();
        let foreground: Vec<bool> = values.iter().map(|&v| bin_of(v) > out.threshold as usize).collect();
        match brute_force_otsu(&values) {
            Some((threshold, variance)) => {
                ensure(
                    !out.degenerate && out.threshold == threshold && out.between_class_variance == variance,
                    || format!("case {case}: got ({}, {}), oracle ({threshold}, {variance})", out.threshold, out.between_class_variance),
                )?;
                ensure(out.mask.bits() == foreground.as_slice(), || format!("case {case}: mask disagrees with threshold"))?;
            }
            None => {
                degenerate += 1;
                let bin = bin_of(values[0]) as u8;
                ensure(
                    out.degenerate
                        && out.threshold == bin
                        && out.between_class_variance == 0.0
                        && out.mask.count_foreground() == values.len(),
                    || format!("case {case}: constant map not handled as degenerate"),
                )?;
            }
        }
    }
    ensure(elapsed < Duration::from_secs(10), || format!("otsu_threshold took {elapsed:?}"))?;
    Ok(format!("1000 maps ({degenerate} constant), otsu time {elapsed:.2?}"))
}

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> Image {
    Image::new(w, h, c, (0..w * h * c).map(|_| rng.random()).collect()).unwrap()
}

fn composition_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0);
    for case in 0..100 {
        let (w, h) = (rng.random_range(1..40), rng.random_range(1..40));
        let c = if rng.random_bool(0.5) { 3 } else { 1 };
        let source = random_image(&mut rng, w, h, c);
        let target = random_image(&mut rng, w, h, c);
        let bits: Vec<bool> = (0..w * h).map(|_| rng.random()).collect();
        let random_mask = BinaryMask::new(w, h, bits).unwrap();
        let all = BinaryMask::filled(w, h, true);
        let none = BinaryMask::filled(w, h, false);
        let run = |m: &BinaryMask, a: &Image, b: &Image| composite(m, a, b).map_err(|e| e.to_string());
        ensure(run(&all, &source, &target)? == source, || format!("case {case}: all-true mask"))?;
        ensure(run(&none, &source, &target)? == target, || format!("case {case}: all-false mask"))?;
        ensure(run(&random_mask, &source, &source)? == source, || format!("case {case}: composite(m, I, I)"))?;
    }
    Ok("100 cases".into())
}

fn selection_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5E1);
    let mut with_ties = 0;
    for case in 0..1000 {
        let (w, h) = (rng.random_range(1..10), rng.random_range(1..10));
        let n = rng.random_range(1..=100);
        // Coarse levels make exact distance ties common.
        let levels = rng.random_range(2..5) as f64;
        let map = |rng: &mut ChaCha8Rng| {
            let values = (0..w * h).map(|_| (rng.random_range(0..levels as usize) as f64) / (levels - 1.0)).collect();
            SaliencyMap::new(w, h, values).unwrap()
        };
        let source = map(&mut rng);
        let mut candidates: Vec<(usize, SaliencyMap)> = (0..n).map(|_| (rng.random_range(0..10_000), map(&mut rng))).collect();
        if rng.random_bool(0.3) && n > 1 {
            let dup = candidates[rng.random_range(0..n)].1.clone();
            let at = rng.random_range(0..n);
            candidates[at].1 = dup;
        }
        let (want_id, want_distance) = brute_force_select(&source, &candidates);
        let ties = candidates
            .iter()
            .filter(|(_, m)| {
                let d: f64 = source.values().iter().zip(m.values()).map(|(a, b)| (a - b) * (a - b)).sum();
                d == want_distance
            })
            .count();
        if ties > 1 {
            with_ties += 1;
        }
        let got = select_target(&source, &candidates).map_err(|e| e.to_string())?;
        ensure(
            got.target_entry_id == want_id && got.l2_distance == want_distance,
            || format!("case {case}: got ({}, {}), oracle ({want_id}, {want_distance})", got.target_entry_id, got.l2_distance),
        )?;
    }
    ensure(with_ties > 0, || "no batch exercised a tie".into())?;
    Ok(format!("1000 batches, {with_ties} with tied minima"))
}

fn noise_stub_statistics() -> Outcome {
    let schedule = NoiseSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x4015E);
    let img = random_image(&mut rng, 48, 32, 3);
    ensure(forward_noise(&img, 0.0, &schedule, 9) == img, || "strength 0 changed the image".into())?;

    let zero = Image::filled(256, 256, &[0]).unwrap();
    let samples = forward_noise_samples(&zero, 1.0, &schedule, 1);
    let n = samples.values.len() as f64;
    let mean = samples.values.iter().sum::<f64>() / n;
    let variance = samples.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let expected = 1.0 - schedule.alpha_bar(schedule.total_steps());
    let rel = (variance - expected).abs() / expected;
    ensure(rel < 0.05, || format!("variance {variance} vs {expected} (rel {rel:.4})"))?;

    let gray = Image::filled(128, 128, &[128, 128, 128]).unwrap();
    let deviation = |s: f64| {
        let out = forward_noise(&gray, s, &schedule, 7);
        out.data().iter().map(|&v| (f64::from(v) - 128.0).abs()).sum::<f64>() / out.data().len() as f64
    };
    let mags: Vec<f64> = [0.1, 0.5, 0.9].into_iter().map(deviation).collect();
    ensure(mags[0] < mags[1] && mags[1] < mags[2], || format!("deviation not monotone: {mags:?}"))?;
    // Same check before quantization, where clipping cannot flatten it.
    let spread = |s: f64| {
        let signal = to_unit_range(128);
        let samples = forward_noise_samples(&gray, s, &schedule, 7);
        samples.values.iter().map(|v| (v - signal * samples.alpha_bar.sqrt()).powi(2)).sum::<f64>()
            / samples.values.len() as f64
    };
    let raw: Vec<f64> = [0.1, 0.5, 0.9].into_iter().map(spread).collect();
    ensure(raw[0] < raw[1] && raw[1] < raw[2], || format!("pre-quantization spread not monotone: {raw:?}"))?;
    Ok(format!(
        "variance {variance:.5} vs 1-abar_T {expected:.5} (rel {rel:.4}); mean |dev| {:.2} < {:.2} < {:.2}; raw var {:.3} < {:.3} < {:.3}",
        mags[0], mags[1], mags[2], raw[0], raw[1], raw[2]
    ))
}

fn label_preservation() -> Outcome {
    let dir = tempdir().map_err(|e| e.to_string())?;
    let (_, index) = toy_dataset(&dir.path().join("data"), 10, 3, 32, 21);
    let cfg = AugmentationConfig {
        expansion_multiplier: 5,
        master_seed: 21,
        ..AugmentationConfig::default()
    };
    let report = augment_dataset(&index, &cfg, dir.path().join("out")).map_err(|e| e.to_string())?;
    ensure(report.records.len() == 50, || format!("{} records", report.records.len()))?;
    for r in &report.records {
        let want = index.entries()[r.source_entry_id].class_id;
        ensure(r.class_id == want, || format!("record for entry {} has class {}", r.source_entry_id, r.class_id))?;
        let sum: f64 = r.soft_label.iter().sum();
        ensure((sum - 1.0).abs() <= 1e-9, || format!("soft label sums to {sum}"))?;
        let argmax = r
            .soft_label
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        ensure(argmax == want && r.soft_label[want] == 0.9, || format!("soft label {:?} for class {want}", r.soft_label))?;
    }
    Ok("50 records, class preserved, labels sum to 1 with 0.9 at class".into())
}

fn cardinality_and_determinism() -> Outcome {
    let dir = tempdir().map_err(|e| e.to_string())?;
    let (_, index) = toy_dataset(&dir.path().join("data"), 10, 3, 64, 33);
    let cfg = AugmentationConfig {
        master_seed: 33,
        ..AugmentationConfig::default()
    };
    let start = Instant::now();
    let a = augment_dataset_with(&index, &cfg, &IdentityRefiner, dir.path().join("a"), 1).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let b = augment_dataset_with(&index, &cfg, &IdentityRefiner, dir.path().join("b"), 1).map_err(|e| e.to_string())?;
    let expected = index.len() * cfg.expansion_multiplier;
    ensure(a.records.len() + a.failures.len() == expected, || {
        format!("{} + {} != {expected}", a.records.len(), a.failures.len())
    })?;
    let (ta, tb) = (tree_contents(&dir.path().join("a")), tree_contents(&dir.path().join("b")));
    ensure(ta == tb && a == b, || "output trees differ between identical runs".into())?;
    ensure(elapsed < Duration::from_secs(10), || format!("single-worker run took {elapsed:?}"))?;
    Ok(format!("{expected} samples, {} files identical, single worker {elapsed:.2?}", ta.len()))
}

fn replacement_sampler() -> Outcome {
    let record = ManifestRecord {
        generated_path: "images/000000_r0.png".into(),
        source_entry_id: 0,
        target_entry_id: 1,
        class_id: 0,
        soft_label: vec![0.9, 0.1],
        strength_used: 0.7,
        seeds: (0, 0),
        l2_distance: 0.0,
    };
    let view = sample_training_view(100_000, &[record], 0.1, 2024).map_err(|e| e.to_string())?;
    let replaced = view.iter().filter(|s| matches!(s.source, SlotSource::Generated(_))).count();
    let fraction = replaced as f64 / view.len() as f64;
    ensure((0.09..=0.11).contains(&fraction), || format!("fraction {fraction}"))?;
    Ok(format!("replaced fraction {fraction:.4}"))
}

fn spectral_localization() -> Outcome {
    let params = SpectralResidualParams::default();
    let mut ratios = Vec::new();
    for seed in 0..20 {
        let (img, corner) = blob_on_noise(64, 8, 100, seed);
        let map = spectral_residual(&img, &params).map_err(|e| e.to_string())?;
        let (inside, outside) = inside_outside_means(&map, corner, 8);
        ratios.push(inside / outside);
    }
    let hits = ratios.iter().filter(|&&r| r >= 2.0).count();
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(hits >= 18, || format!("{hits}/20 images reach ratio 2 (ratios {ratios:.2?})"))?;
    Ok(format!("{hits}/20 images with inside/outside >= 2 (min ratio {min:.2})"))
}

fn diffmix_formula() -> Outcome {
    let (a, b) = diffmix_label(DiffMixLabelParams::new(0.7, 0.5).map_err(|e| e.to_string())?);
    ensure((a - 0.16334).abs() <= 1e-5 && (b - 0.83666).abs() <= 1e-5, || format!("got ({a}, {b})"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let params = DiffMixLabelParams::new(rng.random_range(0.0..=1.0), rng.random_range(0.01..4.0)).map_err(|e| e.to_string())?;
        let (x, y) = diffmix_label(params);
        ensure((x + y - 1.0).abs() <= 1e-12, || format!("{params:?} sums to {}", x + y))?;
    }
    Ok(format!("({a:.5}, {b:.5}), 1000 random weight pairs sum to 1"))
}

fn service_contract() -> Outcome {
    let service = spawn(Behavior::Stub);
    let client = RemoteRefiner::new(&service.endpoint, Duration::from_secs(10));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let img = random_image(&mut rng, 17, 11, 3);
    let req = |s: f64, seed: u64| RefineRequest::new(img.clone(), PromptSpec::new("<class_0>", "bird"), s, seed).unwrap();
    ensure(refine_remote(&req(0.0, 1), &client).map_err(|e| e.to_string())? == img, || "strength 0 round trip changed the image".into())?;
    let health = client.health().map_err(|e| e.to_string())?;
    ensure(health.mode == "stub", || format!("mode {}", health.mode))?;

    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let status = |body: &str| -> Result<u16, String> {
        agent
            .post(format!("{}/refine", service.endpoint))
            .header("content-type", "application/json")
            .send(body)
            .map(|r| r.status().as_u16())
            .map_err(|e| e.to_string())
    };
    let bad_json = status("{oops")?;
    let bad_image = status(r#"{"image_png_b64":"@@","prompt":"p","strength":0.5,"seed":1}"#)?;
    ensure(bad_json == 400 && bad_image == 422, || format!("malformed requests got {bad_json}/{bad_image}"))?;

    let ok = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..4).map(|seed| {
            let (client, req) = (&client, &req);
            scope.spawn(move || client_refine(client, &req(0.5, seed)))
        }).collect();
        handles.into_iter().all(|h| h.join().unwrap_or(false))
    });
    ensure(ok, || "concurrent requests failed".into())?;
    Ok("byte-identical echo, 400/422 on malformed input, health mode stub, 4 concurrent ok".into())
}

fn client_refine(client: &RemoteRefiner, req: &RefineRequest) -> bool {
    refine_remote(req, client).is_ok()
}

fn main() -> ExitCode {
    let _ = env_logger::builder().is_test(true).filter_level(log::LevelFilter::Error).try_init();
    let criteria: [Criterion; 10] = [
        ("otsu oracle equivalence", otsu_oracle),
        ("composition identities", composition_identities),
        ("selection oracle equivalence", selection_oracle),
        ("noise stub statistics", noise_stub_statistics),
        ("label preservation", label_preservation),
        ("cardinality and determinism", cardinality_and_determinism),
        ("replacement sampler", replacement_sampler),
        ("spectral residual localization", spectral_localization),
        ("diff-mix label formula", diffmix_formula),
        ("refinement service contract (client against stub)", service_contract),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
