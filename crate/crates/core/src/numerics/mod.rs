//! Dense tensors, seeded random number generation, and numerically stable
//! elementary operations shared by the rest of the crate.

mod rng;
mod tensor;

pub use rng::Rng;
pub use tensor::Tensor;

use crate::error::{Error, Result};

/// Numerically stable softmax: `exp(x_j - max) / sum_k exp(x_k - max)`.
///
/// Invariant under adding a constant to all logits; the output sums to 1
/// within 1e-12 for inputs up to ~1e4 in magnitude.
pub fn stable_softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::InvalidInput("softmax of empty vector".into()));
    }
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}

/// Euclidean norm.
pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Cosine of the angle between `u` and `v`, clamped into [-1, 1] so that
/// near-parallel vectors cannot escape the domain of `acos` by rounding.
///
/// Zero-norm arguments are an error; callers that need a fallback decide
/// what to substitute (the loss layer uses sigma = 0).
pub fn cosine_angle(u: &[f64], v: &[f64]) -> Result<f64> {
    let nu = l2_norm(u);
    let nv = l2_norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::DegenerateVector(
            "cosine_angle requires nonzero norms".into(),
        ));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// `|xi|` with `xi` standard normal; exactly one normal draw from `rng`.
pub fn sample_abs_normal(rng: &mut Rng) -> f64 {
    rng.abs_normal()
}

/// Compensated (Neumaier) summation. Used where the sum must be as close
/// to correctly rounded as the format allows, e.g. the saturation metric
/// averaged over a whole training set.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_uniform_on_equal_logits() {
        let p = stable_softmax(&[0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p, vec![0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn softmax_ln3_gap() {
        // exp ratio: e^c / (e^c + e^{c+ln 3}) = 1/4 for any c.
        for c in [-50.0, 0.0, 3.25, 1e3] {
            let p = stable_softmax(&[c, c + 3f64.ln()]).unwrap();
            assert!((p[0] - 0.25).abs() < 1e-12);
            assert!((p[1] - 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_shift_invariant() {
        let f = [0.3, -1.2, 4.0, 0.0, 2.5];
        let shifted: Vec<f64> = f.iter().map(|v| v + 100.0).collect();
        let a = stable_softmax(&f).unwrap();
        let b = stable_softmax(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(stable_softmax(&[1.0, f64::NAN]).is_err());
        assert!(stable_softmax(&[f64::INFINITY, 0.0]).is_err());
        assert!(stable_softmax(&[]).is_err());
    }

    #[test]
    fn l2_norm_basics() {
        assert_eq!(l2_norm(&[3.0, 4.0]), 5.0);
        assert_eq!(l2_norm(&[0.0, 0.0, 0.0]), 0.0);
        let v = [0.3, -1.7, 2.2];
        let scaled: Vec<f64> = v.iter().map(|x| x * -3.5).collect();
        assert!((l2_norm(&scaled) - 3.5 * l2_norm(&v)).abs() < 1e-12);
    }

    #[test]
    fn cosine_angle_basics() {
        // norms 5 and 5 are exactly representable, so u == v gives 1 exactly
        assert_eq!(cosine_angle(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert!(1.0 - cosine_angle(&[2.0, 1.0], &[2.0, 1.0]).unwrap() < 1e-14);
        assert_eq!(cosine_angle(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine_angle(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), -1.0);
        assert!(cosine_angle(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn cosine_angle_always_in_range() {
        // near-parallel pairs stress the clamp
        let mut rng = Rng::new(14);
        for _ in 0..10_000 {
            let d = 1 + (rng.next_u64() % 8) as usize;
            let u: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let mut v: Vec<f64> = u.iter().map(|x| x * 3.0).collect();
            if rng.next_f64() < 0.5 {
                v[0] += rng.normal() * 1e-12;
            }
            if l2_norm(&u) == 0.0 || l2_norm(&v) == 0.0 {
                continue;
            }
            let c = cosine_angle(&u, &v).unwrap();
            assert!((-1.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn abs_normal_half_normal_mean() {
        // Monte-Carlo oracle: E|xi| = sqrt(2/pi) ~ 0.7979, se ~ 6e-4 at 1e6.
        let mut rng = Rng::new(2024);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_abs_normal(&mut rng)).sum::<f64>() / n as f64;
        let expected = (2.0 / std::f64::consts::PI).sqrt();
        assert!(
            (mean - expected).abs() < 0.01,
            "mean {mean} vs {expected}"
        );
    }

    #[test]
    fn abs_normal_nonnegative_and_deterministic() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..1000 {
            let x = sample_abs_normal(&mut a);
            let y = sample_abs_normal(&mut b);
            assert!(x >= 0.0);
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn neumaier_recovers_uniform_mean() {
        let p = 1.0 / 10.0;
        let total = neumaier_sum(std::iter::repeat(p).take(600));
        assert_eq!(total / 600.0, p);
    }
}
