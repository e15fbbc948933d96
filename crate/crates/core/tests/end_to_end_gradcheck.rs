//! Full-chain gradient verification: finite differences through the
//! network and the noisy head together, with frozen noise draws.

use nsfx_core::gradcheck::{finite_diff, DEFAULT_STEP};
use nsfx_core::losses::{
    noisy_backward, noisy_forward_with_noise, HeadParams, NoiseSpec, NoiseVariant,
};
use nsfx_core::network::{DataShape, LayerSpec, Network};
use nsfx_core::numerics::{Rng, Tensor};

fn block_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let mut diff_sq = 0.0;
    let mut a_sq = 0.0;
    let mut n_sq = 0.0;
    for (&a, &n) in analytic.iter().zip(numeric) {
        diff_sq += (a - n) * (a - n);
        a_sq += a * a;
        n_sq += n * n;
    }
    diff_sq.sqrt() / a_sq.sqrt().max(n_sq.sqrt()).max(1e-8)
}

fn loss_with(
    net: &Network,
    head: &HeadParams,
    x: &Tensor,
    labels: &[usize],
    spec: &NoiseSpec,
    xi: &[f64],
) -> f64 {
    let features = net.infer(x).unwrap();
    let (loss, _) = noisy_forward_with_noise(head, &features, labels, spec, xi).unwrap();
    loss
}

#[test]
fn network_and_head_gradients_match_finite_differences() {
    let mut rng = Rng::new(90210);
    let input_shape = DataShape::Image { c: 1, h: 6, w: 6 };
    let specs = vec![
        LayerSpec::Conv2d { in_ch: 1, out_ch: 2 },
        LayerSpec::PRelu { channels: 2 },
        LayerSpec::MaxPool,
        LayerSpec::Flatten,
        LayerSpec::Dense {
            in_dim: 18,
            out_dim: 5,
        },
        LayerSpec::PRelu { channels: 5 },
    ];

    for variant in [
        NoiseVariant::Annealed,
        NoiseVariant::Amplitude,
        NoiseVariant::Negative,
        NoiseVariant::Normal,
        NoiseVariant::Free,
    ] {
        let net = Network::new(input_shape, &specs, &mut rng).unwrap();
        let d = net.feature_dim();
        let classes = 3;
        let head_w: Vec<f64> = (0..classes * d).map(|_| rng.normal() * 0.4).collect();
        let head = HeadParams::new(
            Tensor::from_vec(&[classes, d], head_w).unwrap(),
            Tensor::from_vec(&[classes], (0..classes).map(|_| rng.normal() * 0.1).collect())
                .unwrap(),
        )
        .unwrap();

        let n = 3;
        let x =
            Tensor::from_vec(&[n, 36], (0..n * 36).map(|_| rng.normal() * 0.8).collect()).unwrap();
        let labels = vec![0usize, 2, 1];
        let xi: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let spec = NoiseSpec::from_alpha_squared(variant, 0.3).unwrap();

        // analytic gradients through the chain
        let (features, cache) = net.forward(&x).unwrap();
        let (_, pass) = noisy_forward_with_noise(&head, &features, &labels, &spec, &xi).unwrap();
        let (d_features, dw_head, db_head) = noisy_backward(&pass, &head, &features).unwrap();
        let (net_grads, dx_input) = net.backward(&cache, &d_features).unwrap();

        // every network parameter block
        let block_meta: Vec<(String, Vec<f64>)> = net
            .param_blocks()
            .into_iter()
            .map(|(name, _, t)| (name, t.data().to_vec()))
            .collect();
        for (bi, (name, point)) in block_meta.iter().enumerate() {
            let numeric = finite_diff(
                |p| {
                    let mut probe = net.clone();
                    probe.param_blocks_mut()[bi].2.data_mut().copy_from_slice(p);
                    Ok(loss_with(&probe, &head, &x, &labels, &spec, &xi))
                },
                point,
                DEFAULT_STEP,
            )
            .unwrap();
            let rel = block_rel_err(net_grads.0[bi].data(), &numeric);
            assert!(rel < 1e-5, "{variant:?} {name}: rel err {rel:.3e}");
        }

        // the head
        let numeric_w = finite_diff(
            |p| {
                let probe = HeadParams::new(
                    Tensor::from_vec(&[classes, d], p.to_vec()).unwrap(),
                    head.b.clone(),
                )
                .unwrap();
                Ok(loss_with(&net, &probe, &x, &labels, &spec, &xi))
            },
            head.w.data(),
            DEFAULT_STEP,
        )
        .unwrap();
        let rel = block_rel_err(dw_head.data(), &numeric_w);
        assert!(rel < 1e-5, "{variant:?} head.weight: rel err {rel:.3e}");

        let numeric_b = finite_diff(
            |p| {
                let probe = HeadParams::new(
                    head.w.clone(),
                    Tensor::from_vec(&[classes], p.to_vec()).unwrap(),
                )
                .unwrap();
                Ok(loss_with(&net, &probe, &x, &labels, &spec, &xi))
            },
            head.b.data(),
            DEFAULT_STEP,
        )
        .unwrap();
        let rel = block_rel_err(db_head.data(), &numeric_b);
        assert!(rel < 1e-5, "{variant:?} head.bias: rel err {rel:.3e}");

        // the raw input
        let numeric_x = finite_diff(
            |p| {
                let probe = Tensor::from_vec(&[n, 36], p.to_vec()).unwrap();
                Ok(loss_with(&net, &head, &probe, &labels, &spec, &xi))
            },
            x.data(),
            DEFAULT_STEP,
        )
        .unwrap();
        let rel = block_rel_err(dx_input.data(), &numeric_x);
        assert!(rel < 1e-5, "{variant:?} input: rel err {rel:.3e}");
    }
}
