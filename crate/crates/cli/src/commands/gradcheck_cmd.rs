//! Gradient verification sweep: random head/feature configurations per
//! variant and alpha^2, analytic backward vs central differences.

use anyhow::Result;
use nsfx_core::gradcheck::{check_loss_gradients, random_sizes, LossCheckSpec};
use nsfx_core::losses::NoiseVariant;
use nsfx_core::numerics::Rng;

pub struct GradcheckOptions {
    pub variants: Vec<NoiseVariant>,
    pub configs: usize,
    pub alpha_squared: Vec<f64>,
    pub tolerance: f64,
    pub seed: u64,
    pub quiet: bool,
}

struct CellStats {
    variant: NoiseVariant,
    alpha_squared: f64,
    worst_rel: f64,
    worst_block: String,
    worst_config: usize,
    failures: usize,
}

/// Returns true iff every configuration passed at the tolerance.
pub fn run(opts: &GradcheckOptions) -> Result<bool> {
    let root = Rng::new(opts.seed);
    let mut table: Vec<CellStats> = Vec::new();
    for &variant in &opts.variants {
        for &alpha_squared in &opts.alpha_squared {
            table.push(CellStats {
                variant,
                alpha_squared,
                worst_rel: 0.0,
                worst_block: String::new(),
                worst_config: 0,
                failures: 0,
            });
        }
    }

    for k in 0..opts.configs {
        let mut cfg_rng = root.substream(k as u64);
        let (classes, feature_dim, batch) = random_sizes(&mut cfg_rng);
        let data_seed = cfg_rng.next_u64();
        let mut cell = 0usize;
        for &variant in &opts.variants {
            for &alpha_squared in &opts.alpha_squared {
                let spec = LossCheckSpec {
                    classes,
                    feature_dim,
                    batch,
                    variant,
                    alpha: alpha_squared.sqrt(),
                    seed: data_seed,
                };
                let report = check_loss_gradients(&spec, opts.tolerance)?;
                let stats = &mut table[cell];
                if !report.passed {
                    stats.failures += 1;
                }
                if report.max_rel_err() > stats.worst_rel {
                    stats.worst_rel = report.max_rel_err();
                    stats.worst_block = report
                        .worst_block()
                        .map(|b| b.name.clone())
                        .unwrap_or_default();
                    stats.worst_config = k;
                }
                cell += 1;
            }
        }
    }

    let all_passed = table.iter().all(|s| s.failures == 0);
    if !opts.quiet || !all_passed {
        println!(
            "{:<10} {:>8} {:>13} {:>6} {:>7} {:>6}",
            "variant", "alpha^2", "worst rel err", "block", "config", "fails"
        );
        for s in &table {
            println!(
                "{:<10} {:>8} {:>13.3e} {:>6} {:>7} {:>6}",
                s.variant.name(),
                s.alpha_squared,
                s.worst_rel,
                s.worst_block,
                s.worst_config,
                s.failures
            );
        }
        let worst = table.iter().map(|s| s.worst_rel).fold(0.0, f64::max);
        println!(
            "{} configs x {} cells, tolerance {:.1e}, worst {:.3e}: {}",
            opts.configs,
            table.len(),
            opts.tolerance,
            worst,
            if all_passed { "PASS" } else { "FAIL" }
        );
    }
    Ok(all_passed)
}
