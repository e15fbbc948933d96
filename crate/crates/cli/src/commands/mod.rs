pub mod gradcheck_cmd;
pub mod noise_compare;
pub mod saturation;
pub mod train_cmd;

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use nsfx_core::data::Dataset;
use nsfx_core::losses::NoiseVariant;
use nsfx_core::training::{self, MetricsRecord};

use crate::config::ExperimentConfig;
use crate::output::{self, Summary};

/// Train one sweep cell and write its metrics.csv + summary.json into
/// `cell_dir`. Returns the metric rows for aggregation.
pub(crate) fn run_cell(
    cfg: &ExperimentConfig,
    base_train: &Dataset,
    base_test: &Dataset,
    variant: NoiseVariant,
    alpha_squared: f64,
    seed: u64,
    cell_dir: &Path,
) -> Result<Vec<MetricsRecord>> {
    std::fs::create_dir_all(cell_dir)
        .with_context(|| format!("cannot create {}", cell_dir.display()))?;
    let started = std::time::Instant::now();
    let (train_ds, test_ds) = cfg.materialize(base_train, base_test, seed)?;
    let train_cfg = cfg.train_config(variant, alpha_squared, seed)?;
    let (metrics, _model) = training::train(&train_cfg, &train_ds, &test_ds)?;

    output::write_atomic(
        &cell_dir.join("metrics.csv"),
        output::metrics_csv(&metrics).as_bytes(),
    )?;
    let wall = if cfg.real_timing {
        started.elapsed().as_millis() as u64
    } else {
        0
    };
    let summary = Summary::from_metrics(
        &metrics,
        seed,
        cfg.total_iterations,
        wall,
        cfg.echo(variant, alpha_squared, seed),
    );
    output::write_atomic(&cell_dir.join("summary.json"), summary.to_json()?.as_bytes())?;
    Ok(metrics)
}

/// Worker cap: NSFX_THREADS when set, else the machine's parallelism.
pub(crate) fn thread_cap(jobs: usize) -> usize {
    let hw = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let cap = match std::env::var("NSFX_THREADS") {
        Ok(v) => v.parse::<usize>().ok().filter(|&n| n > 0).unwrap_or(hw),
        Err(_) => hw,
    };
    cap.min(jobs).max(1)
}

/// Run `jobs` closures across capped worker threads; results come back in
/// job order regardless of scheduling.
pub(crate) fn run_parallel<T, F>(jobs: Vec<F>, workers: usize) -> Vec<Result<T>>
where
    T: Send,
    F: Fn() -> Result<T> + Send + Sync,
{
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<T>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let out = jobs[i]();
                results.lock().unwrap()[i] = Some(out);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("worker completed every claimed job"))
        .collect()
}

/// Shortest-roundtrip float formatting shared by all CSV writers.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
