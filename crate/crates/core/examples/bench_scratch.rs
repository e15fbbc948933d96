// scratch calibration harness, not part of the deliverable
use nsfx_core::data::{mean_subtract, subset_per_class, synthetic_digits, Dataset};
use nsfx_core::losses::{NoiseSpec, NoiseVariant};
use nsfx_core::network::desk_mlp;
use nsfx_core::training::{train, LrSchedule, TrainConfig};
use std::time::Instant;

fn cfg(variant: NoiseVariant, a2: f64, seed: u64, total: u64, base_lr: f64, k: u64) -> TrainConfig {
    TrainConfig {
        layers: desk_mlp(),
        noise: NoiseSpec::from_alpha_squared(variant, a2).unwrap(),
        batch_size: 64,
        total_iterations: total,
        schedule: LrSchedule {
            base: base_lr,
            drop_iterations: vec![total * 3 / 4],
            factor: 10.0,
        },
        weight_decay: 1e-3,
        momentum: 0.9,
        seed,
        pbar_interval: k,
        eval_interval: k,
        real_timing: false,
    }
}

/// subset -> mean-subtract -> train; returns (final test err, pbar@checkpoint)
fn protocol_run(
    full: &Dataset,
    test: &Dataset,
    variant: NoiseVariant,
    a2: f64,
    seed: u64,
    total: u64,
    lr: f64,
    k: u64,
    checkpoint: u64,
) -> (f64, f64) {
    let mut train_ds = subset_per_class(full, 60, seed).unwrap();
    let mut test_ds = test.clone();
    mean_subtract(&mut train_ds, &mut [&mut test_ds]).unwrap();
    let (metrics, _) = train(&cfg(variant, a2, seed, total, lr, k), &train_ds, &test_ds).unwrap();
    let last = metrics.last().unwrap();
    let at = metrics
        .iter()
        .find(|m| m.iteration == checkpoint)
        .map(|m| m.p_bar)
        .unwrap_or(f64::NAN);
    (last.test_err, at)
}

fn main() {
    let full = synthetic_digits(600, 1000).unwrap();
    let test = synthetic_digits(200, 2000).unwrap();

    // --- criterion 5 shape: saturation ordering, 200 iters, checkpoint 50
    println!("== saturation study (total 200, lr 0.03, checkpoint 50) ==");
    let seeds5 = [1u64, 2, 3];
    let mut tbl: Vec<(&str, Vec<f64>)> = Vec::new();
    for (variant, a2, name) in [
        (NoiseVariant::None, 0.0, "none"),
        (NoiseVariant::Negative, 0.1, "negative"),
        (NoiseVariant::Annealed, 0.1, "annealed"),
    ] {
        let t0 = Instant::now();
        let pbars: Vec<f64> = seeds5
            .iter()
            .map(|&s| protocol_run(&full, &test, variant, a2, s, 200, 0.03, 50, 50).1)
            .collect();
        println!(
            "  {name}: pbar@50 per seed {:?}  mean {:.4}  ({} ms)",
            pbars.iter().map(|p| (p * 1e4).round() / 1e4).collect::<Vec<_>>(),
            pbars.iter().sum::<f64>() / pbars.len() as f64,
            t0.elapsed().as_millis()
        );
        tbl.push((name, pbars));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let none_m = mean(&tbl[0].1);
    println!(
        "  margins: negative-none {:+.4}, annealed-none {:+.4}",
        mean(&tbl[1].1) - none_m,
        mean(&tbl[2].1) - none_m
    );

    // --- criterion 6 shape: annealed 0.5 vs none, 5 seeds, 1500 iters
    println!("== regularization study (total 1500, lr 0.05) ==");
    let seeds6 = [1u64, 2, 3, 4, 5];
    let mut none_errs = Vec::new();
    let mut ann_errs = Vec::new();
    for &s in &seeds6 {
        let t0 = Instant::now();
        let (e_none, _) =
            protocol_run(&full, &test, NoiseVariant::None, 0.0, s, 1500, 0.05, 500, 0);
        let (e_ann, _) =
            protocol_run(&full, &test, NoiseVariant::Annealed, 0.5, s, 1500, 0.05, 500, 0);
        println!(
            "  seed {s}: none {e_none:5.2}%  annealed05 {e_ann:5.2}%  diff {:+.2}  ({} ms)",
            e_ann - e_none,
            t0.elapsed().as_millis()
        );
        none_errs.push(e_none);
        ann_errs.push(e_ann);
    }
    let wins = none_errs
        .iter()
        .zip(&ann_errs)
        .filter(|(n, a)| a < n)
        .count();
    println!(
        "  wins {wins}/5, means none {:.3} annealed05 {:.3}",
        mean(&none_errs),
        mean(&ann_errs)
    );

    // --- criterion 7 shape: annealed01 <= free01 <= none, 3 seeds
    println!("== noise family study (total 1500, lr 0.05) ==");
    let seeds7 = [1u64, 2, 3];
    let mut fam: Vec<(&str, Vec<f64>)> = Vec::new();
    for (variant, a2, name) in [
        (NoiseVariant::Annealed, 0.1, "annealed01"),
        (NoiseVariant::Free, 0.1, "free01"),
        (NoiseVariant::None, 0.0, "none"),
    ] {
        let errs: Vec<f64> = seeds7
            .iter()
            .map(|&s| protocol_run(&full, &test, variant, a2, s, 1500, 0.05, 500, 0).0)
            .collect();
        println!("  {name}: {errs:?}  mean {:.3}", mean(&errs));
        fam.push((name, errs));
    }
    println!(
        "  ordering: {:.3} <= {:.3} <= {:.3} (+0.2 slack each)",
        mean(&fam[0].1),
        mean(&fam[1].1),
        mean(&fam[2].1)
    );
}
