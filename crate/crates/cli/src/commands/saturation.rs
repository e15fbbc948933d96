//! Saturation study: train each variant with paired seeds at one alpha^2,
//! sampling the average prediction every K iterations. saturation.csv
//! holds the seed-mean curve per variant.

use anyhow::{bail, Context, Result};
use nsfx_core::losses::NoiseVariant;
use nsfx_core::training::MetricsRecord;

use super::{fmt_f64, run_cell, run_parallel, thread_cap};
use crate::config::ExperimentConfig;
use crate::output;

pub const SATURATION_HEADER: &str = "iteration,variant,p_bar,test_err";

pub fn run(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.sweep_variants.is_empty() {
        bail!("saturation-study needs sweep.variants");
    }
    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("cannot create {}", cfg.output_dir.display()))?;

    let (base_train, base_test) = cfg.build_base_datasets()?;
    let alpha_squared = cfg.alpha_squared;

    struct Job {
        variant: NoiseVariant,
        seed: u64,
    }
    let mut plan = Vec::new();
    for &variant in &cfg.sweep_variants {
        for &seed in &cfg.sweep_seeds {
            let a2 = if variant == NoiseVariant::None {
                0.0
            } else {
                alpha_squared
            };
            let _ = a2;
            plan.push(Job { variant, seed });
        }
    }
    log::info!(
        "saturation-study: {} variants x {} seeds at a2={}",
        cfg.sweep_variants.len(),
        cfg.sweep_seeds.len(),
        alpha_squared
    );

    let jobs: Vec<_> = plan
        .iter()
        .map(|job| {
            let base_train = &base_train;
            let base_test = &base_test;
            move || {
                let a2 = if job.variant == NoiseVariant::None {
                    0.0
                } else {
                    alpha_squared
                };
                let dir = cfg
                    .output_dir
                    .join("cells")
                    .join(format!("{}_s{}", job.variant.name(), job.seed));
                run_cell(cfg, base_train, base_test, job.variant, a2, job.seed, &dir)
            }
        })
        .collect();
    let workers = thread_cap(jobs.len());
    let results = run_parallel(jobs, workers);
    let mut curves: Vec<(NoiseVariant, Vec<MetricsRecord>)> = Vec::new();
    for (job, result) in plan.iter().zip(results) {
        curves.push((job.variant, result?));
    }

    // seed-mean per (variant, iteration); all runs share sampling points
    let seeds = cfg.sweep_seeds.len();
    let sample_iters: Vec<u64> = curves[0].1.iter().map(|m| m.iteration).collect();
    let mut csv = String::from(SATURATION_HEADER);
    csv.push('\n');
    for (row, &iteration) in sample_iters.iter().enumerate() {
        for (vi, &variant) in cfg.sweep_variants.iter().enumerate() {
            let mut p_bar = 0.0;
            let mut test_err = 0.0;
            for si in 0..seeds {
                let rec = &curves[vi * seeds + si].1[row];
                debug_assert_eq!(rec.iteration, iteration);
                p_bar += rec.p_bar;
                test_err += rec.test_err;
            }
            csv.push_str(&format!(
                "{},{},{},{}\n",
                iteration,
                variant.name(),
                fmt_f64(p_bar / seeds as f64),
                fmt_f64(test_err / seeds as f64)
            ));
        }
    }
    output::write_atomic(&cfg.output_dir.join("saturation.csv"), csv.as_bytes())?;
    Ok(())
}
