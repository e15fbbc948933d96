//! Cartesian sweep over noise variants and alpha^2 values with paired
//! seeds: every cell of one seed shares initialization and data order, so
//! differences isolate the noise term.

use anyhow::{bail, Context, Result};
use nsfx_core::losses::NoiseVariant;

use super::{fmt_f64, run_cell, run_parallel, thread_cap};
use crate::config::ExperimentConfig;
use crate::output;

pub const COMPARISON_HEADER: &str = "variant,alpha_squared,seed,final_test_err,final_p_bar";

/// Sweep cells after sigma = 0 deduplication: any non-`none` variant with
/// alpha^2 = 0 collapses into the canonical (none, 0) cell.
pub fn dedup_cells(variants: &[NoiseVariant], alphas: &[f64]) -> Vec<(NoiseVariant, f64)> {
    let mut cells: Vec<(NoiseVariant, f64)> = Vec::new();
    for &v in variants {
        for &a2 in alphas {
            let cell = if a2 == 0.0 {
                (NoiseVariant::None, 0.0)
            } else {
                (v, a2)
            };
            if !cells
                .iter()
                .any(|&(cv, ca)| cv == cell.0 && ca == cell.1)
            {
                cells.push(cell);
            }
        }
    }
    cells
}

pub fn cell_dir_name(variant: NoiseVariant, alpha_squared: f64, seed: u64) -> String {
    format!("{}_a2{}_s{}", variant.name(), fmt_f64(alpha_squared), seed)
}

pub fn run(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.sweep_variants.is_empty() {
        bail!("noise-compare needs sweep.variants");
    }
    if cfg.sweep_alpha_squared.is_empty() {
        bail!("noise-compare needs sweep.alpha_squared");
    }
    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("cannot create {}", cfg.output_dir.display()))?;

    let cells = dedup_cells(&cfg.sweep_variants, &cfg.sweep_alpha_squared);
    let (base_train, base_test) = cfg.build_base_datasets()?;

    struct Job {
        variant: NoiseVariant,
        alpha_squared: f64,
        seed: u64,
    }
    let mut plan = Vec::new();
    for &(variant, alpha_squared) in &cells {
        for &seed in &cfg.sweep_seeds {
            plan.push(Job {
                variant,
                alpha_squared,
                seed,
            });
        }
    }
    log::info!(
        "noise-compare: {} cells x {} seeds = {} runs",
        cells.len(),
        cfg.sweep_seeds.len(),
        plan.len()
    );

    let jobs: Vec<_> = plan
        .iter()
        .map(|job| {
            let base_train = &base_train;
            let base_test = &base_test;
            move || {
                let dir = cfg
                    .output_dir
                    .join("cells")
                    .join(cell_dir_name(job.variant, job.alpha_squared, job.seed));
                let metrics = run_cell(
                    cfg,
                    base_train,
                    base_test,
                    job.variant,
                    job.alpha_squared,
                    job.seed,
                    &dir,
                )?;
                let last = metrics.last().unwrap();
                Ok((last.test_err, last.p_bar))
            }
        })
        .collect();
    let workers = thread_cap(jobs.len());
    let results = run_parallel(jobs, workers);

    let mut csv = String::from(COMPARISON_HEADER);
    csv.push('\n');
    for (job, result) in plan.iter().zip(results) {
        let (test_err, p_bar) = result?;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            job.variant.name(),
            fmt_f64(job.alpha_squared),
            job.seed,
            fmt_f64(test_err),
            fmt_f64(p_bar)
        ));
    }
    output::write_atomic(&cfg.output_dir.join("comparison.csv"), csv.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedup_matches_alpha_zero_collapse() {
        // {none, annealed} x {0, 0.1}: the (annealed, 0) cell collapses
        // into (none, 0), leaving 3 cells.
        let cells = dedup_cells(
            &[NoiseVariant::None, NoiseVariant::Annealed],
            &[0.0, 0.1],
        );
        assert_eq!(
            cells,
            vec![
                (NoiseVariant::None, 0.0),
                (NoiseVariant::None, 0.1),
                (NoiseVariant::Annealed, 0.1),
            ]
        );
    }

    #[test]
    fn dedup_without_none_still_collapses() {
        let cells = dedup_cells(&[NoiseVariant::Annealed, NoiseVariant::Free], &[0.0, 0.5]);
        assert_eq!(
            cells,
            vec![
                (NoiseVariant::None, 0.0),
                (NoiseVariant::Annealed, 0.5),
                (NoiseVariant::Free, 0.5),
            ]
        );
    }
}
