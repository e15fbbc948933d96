use anyhow::{Context, Result};
use nsfx_core::training;

use crate::config::ExperimentConfig;
use crate::output::{self, Summary};

pub fn run(cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("cannot create {}", cfg.output_dir.display()))?;
    let started = std::time::Instant::now();

    let (base_train, base_test) = cfg.build_base_datasets()?;
    let (train_ds, test_ds) = cfg.materialize(&base_train, &base_test, cfg.seed)?;
    log::info!(
        "training: {} samples, {} test, {} classes, noise {} a2={}",
        train_ds.len(),
        test_ds.len(),
        train_ds.class_count(),
        cfg.variant.name(),
        cfg.alpha_squared
    );

    let train_cfg = cfg.train_config(cfg.variant, cfg.alpha_squared, cfg.seed)?;
    let (metrics, model) = training::train(&train_cfg, &train_ds, &test_ds)?;

    output::write_atomic(
        &cfg.output_dir.join("metrics.csv"),
        output::metrics_csv(&metrics).as_bytes(),
    )?;
    let wall = if cfg.real_timing {
        started.elapsed().as_millis() as u64
    } else {
        0
    };
    let summary = Summary::from_metrics(
        &metrics,
        cfg.seed,
        cfg.total_iterations,
        wall,
        cfg.echo(cfg.variant, cfg.alpha_squared, cfg.seed),
    );
    output::write_atomic(
        &cfg.output_dir.join("summary.json"),
        summary.to_json()?.as_bytes(),
    )?;
    output::write_atomic(&cfg.output_dir.join("params.bin"), &output::params_bin(&model))?;

    let last = metrics.last().unwrap();
    log::info!(
        "done in {} ms: final train {}%, test {}%, p_bar {:.4}",
        started.elapsed().as_millis(),
        last.train_err,
        last.test_err,
        last.p_bar
    );
    Ok(())
}
