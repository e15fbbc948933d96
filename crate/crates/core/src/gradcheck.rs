//! Finite-difference oracle used to validate every analytic backward pass.
//!
//! The probing contract: the loss closure must be deterministic, so noise
//! draws are frozen and replayed for every perturbed evaluation.

use crate::error::{Error, Result};
use crate::losses::{
    noisy_backward, noisy_forward_with_noise, HeadParams, NoiseSpec, NoiseVariant,
};
use crate::numerics::{l2_norm, Rng, Tensor};

pub const DEFAULT_STEP: f64 = 1e-6;
const REL_FLOOR: f64 = 1e-8;

/// Comparison of one parameter block against the numeric gradient.
///
/// The relative error is norm-based: ||a - n|| / max(||a||, ||n||, 1e-8).
/// An element-wise quotient cannot work at the tolerances used here:
/// central differences carry ~1e-10 of absolute roundoff per element, which
/// against the 1e-8 denominator floor would read as 1e-2 on every entry
/// whose true gradient happens to be zero.
#[derive(Debug, Clone)]
pub struct BlockReport {
    pub name: String,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub worst_index: usize,
}

/// Result of checking all blocks of one configuration.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub blocks: Vec<BlockReport>,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradReport {
    pub fn max_rel_err(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn worst_block(&self) -> Option<&BlockReport> {
        self.blocks
            .iter()
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }
}

/// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h per element.
pub fn finite_diff(
    mut loss_fn: impl FnMut(&[f64]) -> Result<f64>,
    point: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if h <= 0.0 {
        return Err(Error::InvalidInput(format!("step must be > 0, got {h}")));
    }
    let mut probe = point.to_vec();
    let mut grad = vec![0.0; point.len()];
    for i in 0..point.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = loss_fn(&probe)?;
        probe[i] = orig - h;
        let down = loss_fn(&probe)?;
        probe[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Probe {
                index: i,
                detail: format!("non-finite loss ({up}, {down})"),
            });
        }
        grad[i] = (up - down) / (2.0 * h);
    }
    Ok(grad)
}

fn compare(name: &str, analytic: &[f64], numeric: &[f64]) -> BlockReport {
    let mut max_abs = 0.0f64;
    let mut worst = 0;
    let mut diff_sq = 0.0;
    let mut a_sq = 0.0;
    let mut n_sq = 0.0;
    for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        let abs = (a - n).abs();
        if abs > max_abs {
            max_abs = abs;
            worst = i;
        }
        diff_sq += (a - n) * (a - n);
        a_sq += a * a;
        n_sq += n * n;
    }
    let rel = diff_sq.sqrt() / a_sq.sqrt().max(n_sq.sqrt()).max(REL_FLOOR);
    BlockReport {
        name: name.to_string(),
        max_abs_err: max_abs,
        max_rel_err: rel,
        worst_index: worst,
    }
}

/// One randomly drawn head/feature configuration for checking the loss
/// gradients of a noise variant.
#[derive(Debug, Clone)]
pub struct LossCheckSpec {
    pub classes: usize,
    pub feature_dim: usize,
    pub batch: usize,
    pub variant: NoiseVariant,
    pub alpha: f64,
    pub seed: u64,
}

/// Draw sizes for a check configuration: C in [2,10], D in [1,50],
/// N in [1,16].
pub fn random_sizes(rng: &mut Rng) -> (usize, usize, usize) {
    (
        2 + rng.below(9) as usize,
        1 + rng.below(50) as usize,
        1 + rng.below(16) as usize,
    )
}

/// Freeze noise, compare analytic (dX, dW, db) against central differences.
///
/// Feature and weight rows are resampled if their norm passes near zero:
/// the norm is not differentiable there and the sigma = 0 fallback puts a
/// measure-zero kink exactly at that point.
pub fn check_loss_gradients(spec: &LossCheckSpec, tolerance: f64) -> Result<GradReport> {
    let (c, d, n) = (spec.classes, spec.feature_dim, spec.batch);
    if c > 10 || d > 50 || n > 16 {
        return Err(Error::InvalidInput(format!(
            "probing wants C <= 10, D <= 50, N <= 16; got C={c}, D={d}, N={n}"
        )));
    }
    let mut rng = Rng::new(spec.seed);
    let scale = 1.0 / (d as f64).sqrt();
    let min_norm = 1e-3 * scale;

    let draw_row = |rng: &mut Rng| -> Vec<f64> {
        loop {
            let row: Vec<f64> = (0..d).map(|_| rng.normal() * scale).collect();
            if l2_norm(&row) > min_norm {
                return row;
            }
        }
    };

    let mut w = Vec::with_capacity(c * d);
    for _ in 0..c {
        w.extend(draw_row(&mut rng));
    }
    let b: Vec<f64> = (0..c).map(|_| rng.normal() * 0.1).collect();
    let mut x = Vec::with_capacity(n * d);
    for _ in 0..n {
        x.extend(draw_row(&mut rng));
    }
    let labels: Vec<usize> = (0..n).map(|_| rng.below(c as u64) as usize).collect();
    let xi: Vec<f64> = (0..n).map(|_| rng.normal()).collect();

    let head = HeadParams::new(
        Tensor::from_vec(&[c, d], w.clone())?,
        Tensor::from_vec(&[c], b.clone())?,
    )?;
    let features = Tensor::from_vec(&[n, d], x.clone())?;
    let noise = NoiseSpec::new(spec.variant, spec.alpha)?;

    let (_, pass) = noisy_forward_with_noise(&head, &features, &labels, &noise, &xi)?;
    let (dx, dw, db) = noisy_backward(&pass, &head, &features)?;

    let loss_of = |w_flat: &[f64], b_flat: &[f64], x_flat: &[f64]| -> Result<f64> {
        let head = HeadParams::new(
            Tensor::from_vec(&[c, d], w_flat.to_vec())?,
            Tensor::from_vec(&[c], b_flat.to_vec())?,
        )?;
        let features = Tensor::from_vec(&[n, d], x_flat.to_vec())?;
        let (loss, _) = noisy_forward_with_noise(&head, &features, &labels, &noise, &xi)?;
        Ok(loss)
    };

    let num_w = finite_diff(|p| loss_of(p, &b, &x), &w, DEFAULT_STEP)?;
    let num_b = finite_diff(|p| loss_of(&w, p, &x), &b, DEFAULT_STEP)?;
    let num_x = finite_diff(|p| loss_of(&w, &b, p), &x, DEFAULT_STEP)?;

    let blocks = vec![
        compare("W", dw.data(), &num_w),
        compare("b", db.data(), &num_b),
        compare("X", dx.data(), &num_x),
    ];
    let passed = blocks.iter().all(|blk| blk.max_rel_err < tolerance);
    Ok(GradReport {
        blocks,
        tolerance,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_diff_quadratic() {
        // loss = sum of squares, p = (1, 2): gradient (2, 4).
        let grad = finite_diff(
            |p| Ok(p.iter().map(|v| v * v).sum()),
            &[1.0, 2.0],
            DEFAULT_STEP,
        )
        .unwrap();
        assert!((grad[0] - 2.0).abs() < 1e-8);
        assert!((grad[1] - 4.0).abs() < 1e-8);
    }

    #[test]
    fn finite_diff_constant() {
        let grad = finite_diff(|_| Ok(3.5), &[0.1, -0.7, 2.0], DEFAULT_STEP).unwrap();
        assert!(grad.iter().all(|g| g.abs() < 1e-9));
    }

    #[test]
    fn finite_diff_probe_error_carries_index() {
        let err = finite_diff(
            |p| Ok(if p[1] > 0.5 { f64::NAN } else { 0.0 }),
            &[0.0, 0.5],
            DEFAULT_STEP,
        );
        assert!(matches!(err, Err(Error::Probe { index: 1, .. })));
    }

    #[test]
    fn finite_diff_error_shrinks_quadratically() {
        // Central differences on exp at 1: error is O(h^2).
        let f = |p: &[f64]| Ok(p[0].exp());
        let exact = 1f64.exp();
        let e1 = (finite_diff(f, &[1.0], 1e-3).unwrap()[0] - exact).abs();
        let e2 = (finite_diff(f, &[1.0], 5e-4).unwrap()[0] - exact).abs();
        assert!(e1 / e2 > 3.0 && e1 / e2 < 5.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn frozen_noise_probes_are_bitwise_stable() {
        let spec = LossCheckSpec {
            classes: 4,
            feature_dim: 6,
            batch: 3,
            variant: NoiseVariant::Annealed,
            alpha: 0.5,
            seed: 7,
        };
        let a = check_loss_gradients(&spec, 1e-5).unwrap();
        let b = check_loss_gradients(&spec, 1e-5).unwrap();
        assert_eq!(a.max_rel_err().to_bits(), b.max_rel_err().to_bits());
    }

    #[test]
    fn plain_softmax_gradient_is_textbook_tight() {
        for seed in 0..10 {
            let spec = LossCheckSpec {
                classes: 5,
                feature_dim: 8,
                batch: 4,
                variant: NoiseVariant::None,
                alpha: 0.0,
                seed,
            };
            let report = check_loss_gradients(&spec, 1e-7).unwrap();
            assert!(report.passed, "seed {seed}: {:?}", report.worst_block());
        }
    }

    #[test]
    fn all_variants_pass_at_1e5() {
        let mut rng = Rng::new(1234);
        for round in 0..20 {
            let (c, d, n) = random_sizes(&mut rng);
            for variant in NoiseVariant::ALL {
                for alpha_sq in [0.05f64, 0.1, 0.5, 1.0] {
                    let spec = LossCheckSpec {
                        classes: c,
                        feature_dim: d,
                        batch: n,
                        variant,
                        alpha: alpha_sq.sqrt(),
                        seed: 1000 + round,
                    };
                    let report = check_loss_gradients(&spec, 1e-5).unwrap();
                    assert!(
                        report.passed,
                        "{variant:?} a2={alpha_sq} C={c} D={d} N={n}: {:?}",
                        report.worst_block()
                    );
                }
            }
        }
    }
}
