//! SGD training loop with step learning-rate decay, weight decay, and
//! metric collection. Evaluation and the saturation metric always use the
//! plain, noise-free softmax; noise only enters the training loss.

use std::time::Instant;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{self, HeadParams, NoiseSpec};
use crate::network::{LayerSpec, Network, ParamKind};
use crate::numerics::{self, stable_softmax, Rng, Tensor};

/// Piecewise-constant step decay: the rate is divided by `factor` at each
/// listed iteration, inclusively (a drop listed at 12000 applies from
/// iteration 12000 onward).
#[derive(Debug, Clone)]
pub struct LrSchedule {
    pub base: f64,
    pub drop_iterations: Vec<u64>,
    pub factor: f64,
}

pub fn lr_at(schedule: &LrSchedule, iteration: u64) -> f64 {
    let drops = schedule
        .drop_iterations
        .iter()
        .filter(|&&d| d <= iteration)
        .count() as i32;
    schedule.base / schedule.factor.powi(drops)
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub layers: Vec<LayerSpec>,
    pub noise: NoiseSpec,
    pub batch_size: usize,
    pub total_iterations: u64,
    pub schedule: LrSchedule,
    pub weight_decay: f64,
    pub momentum: f64,
    pub seed: u64,
    /// Sampling interval for the saturation metric.
    pub pbar_interval: u64,
    /// Sampling interval for train/test evaluation.
    pub eval_interval: u64,
    /// When false the `ms` metric column is written as 0 so that run
    /// artifacts are byte-reproducible; wall time still goes to the log.
    pub real_timing: bool,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.schedule.base.is_finite() && self.schedule.base > 0.0) {
            return bad(format!("base_lr must be > 0, got {}", self.schedule.base));
        }
        if !(self.schedule.factor.is_finite() && self.schedule.factor >= 1.0) {
            return bad(format!(
                "lr_drop_factor must be >= 1, got {}",
                self.schedule.factor
            ));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            ));
        }
        if !(self.momentum.is_finite() && (0.0..1.0).contains(&self.momentum)) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.pbar_interval == 0 || self.eval_interval == 0 {
            return bad("sampling intervals must be positive".into());
        }
        Ok(())
    }
}

/// One metrics row. `loss` and `train_err` are measured on the full
/// training set with the plain softmax (the noise term is a training
/// perturbation, not part of the reported objective).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub iteration: u64,
    pub loss: f64,
    pub train_err: f64,
    pub test_err: f64,
    pub p_bar: f64,
    pub lr: f64,
    pub ms: u64,
}

/// Final parameters of a training run.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub net: Network,
    pub head: HeadParams,
}

impl TrainedModel {
    /// All parameter tensors in canonical order, network first, then head.
    pub fn param_blocks(&self) -> Vec<(String, ParamKind, &Tensor)> {
        let mut blocks = self.net.param_blocks();
        blocks.push(("head.weight".into(), ParamKind::Weight, &self.head.w));
        blocks.push(("head.bias".into(), ParamKind::Bias, &self.head.b));
        blocks
    }
}

/// Caffe-style SGD update: v <- momentum v - lr (g + weight_decay p);
/// p <- p + v. The caller decides which blocks receive weight decay.
pub fn sgd_step(
    param: &mut [f64],
    grad: &[f64],
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    debug_assert_eq!(param.len(), grad.len());
    debug_assert_eq!(param.len(), velocity.len());
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient element {i}")));
    }
    for ((p, &g), v) in param.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        *v = momentum * *v - lr * (g + weight_decay * *p);
        *p += *v;
    }
    Ok(())
}

/// Bias and PReLU-slope parameters are exempt from weight decay.
fn effective_decay(kind: ParamKind, weight_decay: f64) -> f64 {
    match kind {
        ParamKind::Weight => weight_decay,
        ParamKind::Bias | ParamKind::Slope => 0.0,
    }
}

const EVAL_CHUNK: usize = 512;

/// Error percentage under the plain softmax. Argmax ties break toward the
/// lowest class index.
pub fn evaluate(net: &Network, head: &HeadParams, ds: &Dataset) -> Result<f64> {
    Ok(evaluate_full(net, head, ds)?.error_pct)
}

/// Mean true-class probability (the saturation proxy) over a dataset.
pub fn average_prediction(net: &Network, head: &HeadParams, ds: &Dataset) -> Result<f64> {
    Ok(evaluate_full(net, head, ds)?.p_bar)
}

/// Plain-softmax statistics over a dataset in one pass.
pub struct EvalStats {
    pub loss: f64,
    pub error_pct: f64,
    pub p_bar: f64,
}

pub fn evaluate_full(net: &Network, head: &HeadParams, ds: &Dataset) -> Result<EvalStats> {
    if ds.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    let n = ds.len();
    let mut wrong = 0usize;
    let mut loss_sum = 0.0;
    let mut true_probs = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let end = (start + EVAL_CHUNK).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let (batch, labels) = ds.gather(&idx);
        let features = net.infer(&batch)?;
        for (i, &y) in labels.iter().enumerate() {
            let logits = losses::compute_logits(head, features.row(i))?;
            // argmax with lowest-index tie-breaking
            let mut best = 0usize;
            for (j, &v) in logits.iter().enumerate() {
                if v > logits[best] {
                    best = j;
                }
            }
            if best != y {
                wrong += 1;
            }
            let probs = stable_softmax(&logits)?;
            true_probs.push(probs[y]);
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
            loss_sum += lse - logits[y];
        }
        start = end;
    }
    Ok(EvalStats {
        loss: loss_sum / n as f64,
        error_pct: 100.0 * wrong as f64 / n as f64,
        p_bar: numerics::neumaier_sum(true_probs) / n as f64,
    })
}

/// Shuffled mini-batch SGD per the config; fully deterministic per seed.
///
/// RNG stream layout: substream 0 of the seed initializes parameters,
/// substream 1 drives epoch shuffling, substream 2 drives noise draws.
/// Keeping shuffling and noise independent means two runs that differ only
/// in the noise variant see identical batch compositions.
pub fn train(
    cfg: &TrainConfig,
    train_ds: &Dataset,
    test_ds: &Dataset,
) -> Result<(Vec<MetricsRecord>, TrainedModel)> {
    cfg.validate()?;
    if train_ds.is_empty() || test_ds.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    if train_ds.class_count() != test_ds.class_count() {
        return Err(Error::Mismatch(format!(
            "train has {} classes, test has {}",
            train_ds.class_count(),
            test_ds.class_count()
        )));
    }
    let classes = train_ds.class_count();

    let root = Rng::new(cfg.seed);
    let mut init_rng = root.substream(0);
    let mut shuffle_rng = root.substream(1);
    let mut noise_rng = root.substream(2);

    let net = Network::new(train_ds.sample_shape(), &cfg.layers, &mut init_rng)?;
    let d = net.feature_dim();
    // Hidden layers use He init; the classifier head starts near zero
    // (gaussian, std 0.01) so the norm-scaled noise magnitude anneals up
    // from zero instead of starting at the He-sized ||W_y||.
    let head_w: Vec<f64> = (0..classes * d).map(|_| init_rng.normal() * 0.01).collect();
    let head = HeadParams::new(
        Tensor::from_vec(&[classes, d], head_w)?,
        Tensor::zeros(&[classes]),
    )?;
    let mut model = TrainedModel { net, head };

    let mut velocities: Vec<Tensor> = model
        .param_blocks()
        .iter()
        .map(|(_, _, t)| Tensor::zeros(t.shape()))
        .collect();

    let started = Instant::now();
    let mut metrics = Vec::new();
    let record = |model: &TrainedModel, iteration: u64, metrics: &mut Vec<MetricsRecord>| -> Result<()> {
        let train_stats = evaluate_full(&model.net, &model.head, train_ds)?;
        let test_err = evaluate(&model.net, &model.head, test_ds)?;
        metrics.push(MetricsRecord {
            iteration,
            loss: train_stats.loss,
            train_err: train_stats.error_pct,
            test_err,
            p_bar: train_stats.p_bar,
            lr: lr_at(&cfg.schedule, iteration),
            ms: if cfg.real_timing {
                started.elapsed().as_millis() as u64
            } else {
                0
            },
        });
        Ok(())
    };

    record(&model, 0, &mut metrics)?;

    let n = train_ds.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n; // forces a shuffle on first use

    for t in 1..=cfg.total_iterations {
        if cursor >= n {
            shuffle_rng.shuffle(&mut order);
            cursor = 0;
        }
        let end = (cursor + cfg.batch_size).min(n);
        let batch_idx = &order[cursor..end];
        cursor = end;

        let diverged = |e| match e {
            Error::NonFinite(detail) => Error::Diverged {
                iteration: t,
                detail,
            },
            other => other,
        };

        let (batch, labels) = train_ds.gather(batch_idx);
        let (features, cache) = model.net.forward(&batch).map_err(diverged)?;
        let (loss, pass) =
            losses::noisy_forward(&model.head, &features, &labels, &cfg.noise, &mut noise_rng)
                .map_err(diverged)?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                iteration: t,
                detail: format!("training loss {loss}"),
            });
        }
        let (d_features, dw_head, db_head) = losses::noisy_backward(&pass, &model.head, &features)?;
        let (net_grads, _) = model.net.backward(&cache, &d_features)?;

        let lr = lr_at(&cfg.schedule, t - 1);
        {
            let mut blocks = model.net.param_blocks_mut();
            debug_assert_eq!(blocks.len(), net_grads.0.len());
            for (bi, (_, kind, tensor)) in blocks.iter_mut().enumerate() {
                sgd_step(
                    tensor.data_mut(),
                    net_grads.0[bi].data(),
                    velocities[bi].data_mut(),
                    lr,
                    cfg.momentum,
                    effective_decay(*kind, cfg.weight_decay),
                )
                .map_err(diverged)?;
            }
            let nb = blocks.len();
            sgd_step(
                model.head.w.data_mut(),
                dw_head.data(),
                velocities[nb].data_mut(),
                lr,
                cfg.momentum,
                cfg.weight_decay,
            )
            .map_err(diverged)?;
            sgd_step(
                model.head.b.data_mut(),
                db_head.data(),
                velocities[nb + 1].data_mut(),
                lr,
                cfg.momentum,
                0.0,
            )
            .map_err(diverged)?;
        }

        if t % cfg.eval_interval == 0 || t % cfg.pbar_interval == 0 || t == cfg.total_iterations {
            record(&model, t, &mut metrics)?;
        }
    }

    log::info!(
        "trained {} iterations in {} ms",
        cfg.total_iterations,
        started.elapsed().as_millis()
    );
    Ok((metrics, model))
}
