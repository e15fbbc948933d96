use nsfx_core::losses::{noisy_forward_with_noise, HeadParams, NoiseSpec, NoiseVariant};
use nsfx_core::numerics::{cosine_angle, stable_softmax, Rng, Tensor};
use proptest::prelude::*;

proptest! {
    // Stability stress: logits up to 1e4 in magnitude still give a clean
    // probability vector.
    #[test]
    fn softmax_is_probability_vector(
        logits in prop::collection::vec(-1e4f64..1e4, 1..12)
    ) {
        let p = stable_softmax(&logits).unwrap();
        let sum: f64 = p.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        for &v in &p {
            prop_assert!(v >= 0.0 && v <= 1.0);
            prop_assert!(v.is_finite());
        }
    }

    #[test]
    fn cosine_stays_clamped(
        u in prop::collection::vec(-100f64..100.0, 1..8),
        scale in 0.1f64..50.0,
        jitter in -1e-10f64..1e-10,
    ) {
        // near-parallel pairs are the ones that overshoot by rounding
        let mut v: Vec<f64> = u.iter().map(|x| x * scale).collect();
        v[0] += jitter;
        prop_assume!(u.iter().any(|&x| x != 0.0));
        prop_assume!(v.iter().any(|&x| x != 0.0));
        let c = cosine_angle(&u, &v).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c));
    }

    // Subtracting a non-negative quantity from the true logit cannot lower
    // the loss; adding one cannot raise it.
    #[test]
    fn loss_ordering_holds(seed in any::<u64>(), alpha_sq in 0.01f64..2.0) {
        let mut rng = Rng::new(seed);
        let c = 2 + rng.below(6) as usize;
        let d = 1 + rng.below(10) as usize;
        let n = 1 + rng.below(6) as usize;
        let scale = 1.0 / (d as f64).sqrt();
        let w: Vec<f64> = (0..c * d).map(|_| rng.normal() * scale).collect();
        let b: Vec<f64> = (0..c).map(|_| rng.normal() * 0.1).collect();
        let x: Vec<f64> = (0..n * d).map(|_| rng.normal() * scale).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.below(c as u64) as usize).collect();
        let xi: Vec<f64> = (0..n).map(|_| rng.normal()).collect();

        let head = HeadParams::new(
            Tensor::from_vec(&[c, d], w).unwrap(),
            Tensor::from_vec(&[c], b).unwrap(),
        ).unwrap();
        let features = Tensor::from_vec(&[n, d], x).unwrap();

        let (plain, _) = noisy_forward_with_noise(
            &head, &features, &labels, &NoiseSpec::none(), &xi).unwrap();
        let (annealed, _) = noisy_forward_with_noise(
            &head, &features, &labels,
            &NoiseSpec::from_alpha_squared(NoiseVariant::Annealed, alpha_sq).unwrap(),
            &xi,
        ).unwrap();
        let (negative, _) = noisy_forward_with_noise(
            &head, &features, &labels,
            &NoiseSpec::from_alpha_squared(NoiseVariant::Negative, alpha_sq).unwrap(),
            &xi,
        ).unwrap();
        prop_assert!(annealed >= plain);
        prop_assert!(negative <= plain);
    }

    // free noise with cos theta = 0 and ||W|| ||X|| = 1 coincides with
    // annealed: the sigma family is consistent.
    #[test]
    fn sigma_family_consistency(alpha_sq in 0.01f64..2.0, xi in -3.0f64..3.0) {
        // W_y = e1, X = e2: orthogonal unit vectors
        let head = HeadParams::new(
            Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            Tensor::zeros(&[2]),
        ).unwrap();
        let features = Tensor::from_vec(&[1, 2], vec![0.0, 1.0]).unwrap();
        let labels = [0usize];
        let (free, _) = noisy_forward_with_noise(
            &head, &features, &labels,
            &NoiseSpec::from_alpha_squared(NoiseVariant::Free, alpha_sq).unwrap(),
            &[xi],
        ).unwrap();
        let (annealed, _) = noisy_forward_with_noise(
            &head, &features, &labels,
            &NoiseSpec::from_alpha_squared(NoiseVariant::Annealed, alpha_sq).unwrap(),
            &[xi],
        ).unwrap();
        prop_assert!((free - annealed).abs() < 1e-12);
    }
}
