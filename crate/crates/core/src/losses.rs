//! Classifier head: softmax cross-entropy with noise injected into the
//! true-class logit, forward and analytic backward, plus the saturation
//! metric and the data-augmentation angle identity.
//!
//! The head computes `f_j = W_j . X + b_j`, replaces `f_y` by
//! `f_y - n` for the sample's true class, and evaluates softmax
//! cross-entropy on the modified vector. The noise draw is cached so the
//! backward pass can treat it as a constant.

use crate::error::{Error, Result};
use crate::numerics::{self, stable_softmax, Rng, Tensor};

/// Weights and bias of the final fully connected classifier.
/// Row `j` of `w` is the class-`j` weight vector.
#[derive(Debug, Clone)]
pub struct HeadParams {
    pub w: Tensor, // C x D
    pub b: Tensor, // C
}

impl HeadParams {
    pub fn new(w: Tensor, b: Tensor) -> Result<HeadParams> {
        if w.shape().len() != 2 {
            return Err(Error::Shape(format!(
                "head weights must be 2-D, got {:?}",
                w.shape()
            )));
        }
        let (c, d) = (w.shape()[0], w.shape()[1]);
        if c < 2 || d < 1 {
            return Err(Error::InvalidInput(format!(
                "head needs C >= 2 and D >= 1, got C={c}, D={d}"
            )));
        }
        if b.shape() != [c] {
            return Err(Error::Shape(format!(
                "bias shape {:?} does not match {c} classes",
                b.shape()
            )));
        }
        w.check_finite("head weights")?;
        b.check_finite("head bias")?;
        Ok(HeadParams { w, b })
    }

    pub fn classes(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn feature_dim(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn class_weights(&self, j: usize) -> &[f64] {
        self.w.row(j)
    }
}

/// The noise families applied to the true-class logit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseVariant {
    /// Standard softmax, no draw consumed.
    None,
    /// n = sigma |xi| with sigma = alpha ||W_y|| ||X|| (1 - cos theta).
    Annealed,
    /// Signed noise n = sigma xi, sigma as in Annealed.
    Normal,
    /// n = -sigma |xi|, sigma as in Annealed (saturation counterexample).
    Negative,
    /// n = alpha |xi|, scale detached from the logit magnitude.
    Free,
    /// n = alpha ||W_y|| ||X|| |xi|, amplitude-scaled but not annealed.
    Amplitude,
}

impl NoiseVariant {
    pub const ALL: [NoiseVariant; 6] = [
        NoiseVariant::None,
        NoiseVariant::Annealed,
        NoiseVariant::Normal,
        NoiseVariant::Negative,
        NoiseVariant::Free,
        NoiseVariant::Amplitude,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseVariant::None => "none",
            NoiseVariant::Annealed => "annealed",
            NoiseVariant::Normal => "normal",
            NoiseVariant::Negative => "negative",
            NoiseVariant::Free => "free",
            NoiseVariant::Amplitude => "amplitude",
        }
    }

    pub fn parse(s: &str) -> Result<NoiseVariant> {
        NoiseVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown noise variant `{s}`")))
    }
}

/// Noise selector plus scale. The mean of the raw noise model is fixed to
/// zero; only the scale `alpha` is configurable. User-facing knobs take
/// alpha squared, matching how results are reported.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub variant: NoiseVariant,
    pub alpha: f64,
}

impl NoiseSpec {
    pub fn new(variant: NoiseVariant, alpha: f64) -> Result<NoiseSpec> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidInput(format!(
                "alpha must be finite and >= 0, got {alpha}"
            )));
        }
        Ok(NoiseSpec { variant, alpha })
    }

    pub fn from_alpha_squared(variant: NoiseVariant, alpha_squared: f64) -> Result<NoiseSpec> {
        if !alpha_squared.is_finite() || alpha_squared < 0.0 {
            return Err(Error::InvalidInput(format!(
                "alpha^2 must be finite and >= 0, got {alpha_squared}"
            )));
        }
        NoiseSpec::new(variant, alpha_squared.sqrt())
    }

    pub fn none() -> NoiseSpec {
        NoiseSpec {
            variant: NoiseVariant::None,
            alpha: 0.0,
        }
    }
}

/// Everything the backward pass needs about one sample's forward.
#[derive(Debug, Clone)]
pub struct ForwardRecord {
    /// Unmodified logits f.
    pub logits: Vec<f64>,
    /// The raw standard-normal draw (signed); 0 when the variant is `None`.
    pub xi: f64,
    /// Noise scale sigma actually used.
    pub sigma: f64,
    /// Cached ||W_y|| and ||X|| from the forward pass.
    pub norm_w: f64,
    pub norm_x: f64,
    /// f_y after noise substitution.
    pub noisy_logit: f64,
    /// Softmax over the noise-substituted logit vector.
    pub probs: Vec<f64>,
    /// This sample's contribution before the 1/N average.
    pub loss: f64,
    pub label: usize,
}

/// A completed forward pass: the records plus the spec that produced them,
/// which the backward pass needs to apply the matching derivative.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub spec: NoiseSpec,
    pub records: Vec<ForwardRecord>,
}

/// f_j = W_j . X + b_j for all classes.
pub fn compute_logits(head: &HeadParams, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != head.feature_dim() {
        return Err(Error::Shape(format!(
            "feature length {} does not match head D={}",
            x.len(),
            head.feature_dim()
        )));
    }
    let c = head.classes();
    let mut f = Vec::with_capacity(c);
    for j in 0..c {
        f.push(numerics::dot(head.class_weights(j), x) + head.b.data()[j]);
    }
    Ok(f)
}

fn sigma_parts(head: &HeadParams, x: &[f64], y: usize, spec: &NoiseSpec) -> (f64, f64, f64) {
    let norm_w = numerics::l2_norm(head.class_weights(y));
    let norm_x = numerics::l2_norm(x);
    let sigma = match spec.variant {
        NoiseVariant::None => 0.0,
        NoiseVariant::Free => spec.alpha,
        NoiseVariant::Amplitude => {
            if norm_w == 0.0 || norm_x == 0.0 {
                degenerate_warning(norm_w, norm_x);
                0.0
            } else {
                spec.alpha * norm_w * norm_x
            }
        }
        // Annealed magnitude, shared by the normal and negative variants.
        NoiseVariant::Annealed | NoiseVariant::Normal | NoiseVariant::Negative => {
            if norm_w == 0.0 || norm_x == 0.0 {
                degenerate_warning(norm_w, norm_x);
                0.0
            } else {
                let cos = (numerics::dot(head.class_weights(y), x) / (norm_w * norm_x))
                    .clamp(-1.0, 1.0);
                spec.alpha * norm_w * norm_x * (1.0 - cos)
            }
        }
    };
    (sigma, norm_w, norm_x)
}

fn degenerate_warning(norm_w: f64, norm_x: f64) {
    log::warn!(
        "zero-norm input to noise scale (||W_y||={norm_w}, ||X||={norm_x}); using sigma = 0"
    );
}

/// Noise scale sigma for one sample. Degenerate zero-norm inputs yield
/// sigma = 0 with a logged warning rather than an error.
pub fn noise_sigma(head: &HeadParams, x: &[f64], y: usize, spec: &NoiseSpec) -> Result<f64> {
    if x.len() != head.feature_dim() {
        return Err(Error::Shape(format!(
            "feature length {} does not match head D={}",
            x.len(),
            head.feature_dim()
        )));
    }
    if y >= head.classes() {
        return Err(Error::BadLabel {
            label: y,
            classes: head.classes(),
            sample: 0,
        });
    }
    Ok(sigma_parts(head, x, y, spec).0)
}

/// Per-sample standard-normal draws for a batch of `n` samples.
///
/// Variant `None` consumes nothing. Every other variant consumes exactly
/// one `next_u64` of the parent stream (the batch base) and then derives
/// one independent substream per sample index, so batches may be evaluated
/// sample-parallel with results identical to the sequential order, and
/// changing alpha never shifts draw alignment within a variant.
pub fn draw_noise(variant: NoiseVariant, n: usize, rng: &mut Rng) -> Vec<f64> {
    if variant == NoiseVariant::None {
        return vec![0.0; n];
    }
    let base = Rng::new(rng.next_u64());
    (0..n).map(|i| base.substream(i as u64).normal()).collect()
}

fn signed_noise(variant: NoiseVariant, sigma: f64, xi: f64) -> f64 {
    match variant {
        NoiseVariant::None => 0.0,
        NoiseVariant::Annealed | NoiseVariant::Free | NoiseVariant::Amplitude => sigma * xi.abs(),
        NoiseVariant::Normal => sigma * xi,
        NoiseVariant::Negative => -sigma * xi.abs(),
    }
}

/// Forward pass over a batch with fresh noise draws from `rng`.
pub fn noisy_forward(
    head: &HeadParams,
    x: &Tensor,
    labels: &[usize],
    spec: &NoiseSpec,
    rng: &mut Rng,
) -> Result<(f64, ForwardPass)> {
    let xi = draw_noise(spec.variant, labels.len(), rng);
    noisy_forward_with_noise(head, x, labels, spec, &xi)
}

/// Forward pass with caller-supplied noise draws (one signed standard
/// normal per sample). This is the replay path used by finite-difference
/// probing, where the same draws must be reused for every perturbation.
pub fn noisy_forward_with_noise(
    head: &HeadParams,
    x: &Tensor,
    labels: &[usize],
    spec: &NoiseSpec,
    xi: &[f64],
) -> Result<(f64, ForwardPass)> {
    if x.shape().len() != 2 || x.shape()[1] != head.feature_dim() {
        return Err(Error::Shape(format!(
            "feature batch {:?} does not match head D={}",
            x.shape(),
            head.feature_dim()
        )));
    }
    let n = x.shape()[0];
    if n == 0 {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    if labels.len() != n || xi.len() != n {
        return Err(Error::Mismatch(format!(
            "batch {} vs {} labels vs {} noise draws",
            n,
            labels.len(),
            xi.len()
        )));
    }
    let c = head.classes();

    let mut records = Vec::with_capacity(n);
    let mut loss_sum = 0.0;
    for i in 0..n {
        let y = labels[i];
        if y >= c {
            return Err(Error::BadLabel {
                label: y,
                classes: c,
                sample: i,
            });
        }
        let xrow = x.row(i);
        let logits = compute_logits(head, xrow)?;
        if !logits.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("logits of sample {i}")));
        }
        let (sigma, norm_w, norm_x) = sigma_parts(head, xrow, y, spec);
        let noise = signed_noise(spec.variant, sigma, xi[i]);
        let noisy_logit = logits[y] - noise;

        // Stable softmax-CE over the modified vector. loss_i is computed as
        // (max - f_y) + ln(sum) so it is exactly zero-noise-consistent.
        let mut modified = logits.clone();
        modified[y] = noisy_logit;
        let max = modified.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = modified.iter().map(|&v| (v - max).exp()).collect();
        let sum: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= sum;
        }
        let loss = (max - noisy_logit) + sum.ln();
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss of sample {i}")));
        }

        loss_sum += loss;
        records.push(ForwardRecord {
            logits,
            xi: if spec.variant == NoiseVariant::None {
                0.0
            } else {
                xi[i]
            },
            sigma,
            norm_w,
            norm_x,
            noisy_logit,
            probs,
            loss,
            label: y,
        });
    }

    Ok((
        loss_sum / n as f64,
        ForwardPass {
            spec: *spec,
            records,
        },
    ))
}

/// Analytic backward pass for a recorded forward.
///
/// dL/df_j = (p_j - 1{j = y}) / N with p from the noise-substituted
/// logits. For j != y the chain rule is the standard softmax one; for the
/// true class the cached noise draw is treated as a constant and the
/// derivative of sigma with respect to X and W_y is included.
pub fn noisy_backward(
    pass: &ForwardPass,
    head: &HeadParams,
    x: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let n = pass.records.len();
    if x.shape().len() != 2 || x.shape()[0] != n || x.shape()[1] != head.feature_dim() {
        return Err(Error::Mismatch(format!(
            "records ({n} samples) do not match feature batch {:?}",
            x.shape()
        )));
    }
    let c = head.classes();
    let d = head.feature_dim();
    let inv_n = 1.0 / n as f64;

    let mut dx = Tensor::zeros(&[n, d]);
    let mut dw = Tensor::zeros(&[c, d]);
    let mut db = Tensor::zeros(&[c]);

    for (i, rec) in pass.records.iter().enumerate() {
        if rec.probs.len() != c {
            return Err(Error::Mismatch(format!(
                "record {i} has {} classes, head has {c}",
                rec.probs.len()
            )));
        }
        let y = rec.label;
        let xrow = x.row(i);
        let wy = head.class_weights(y);

        // g_j = (p_j - 1{j=y}) / N
        let mut g: Vec<f64> = rec.probs.iter().map(|p| p * inv_n).collect();
        g[y] -= inv_n;

        // Standard parts: dX += sum_j g_j W_j, dW_j += g_j X, db_j += g_j.
        let dxrow = dx.row_mut(i);
        for j in 0..c {
            let gj = g[j];
            db.data_mut()[j] += gj;
            let wj = head.w.row(j);
            let dwj = dw.row_mut(j);
            for k in 0..d {
                dxrow[k] += gj * wj[k];
                dwj[k] += gj * xrow[k];
            }
        }

        // True-class correction. Written as df/dX = (1+c) W_y - c ||W||/||X|| X
        // (and symmetrically for W), where c scales the annealed-sigma
        // derivative per variant; the amplitude variant keeps the plain
        // W_y/X term uninflated.
        let degenerate = rec.norm_w == 0.0 || rec.norm_x == 0.0;
        if !degenerate {
            let a = pass.spec.alpha;
            let (x_inflate, radial) = match pass.spec.variant {
                NoiseVariant::None | NoiseVariant::Free => (0.0, 0.0),
                NoiseVariant::Annealed => (a * rec.xi.abs(), a * rec.xi.abs()),
                NoiseVariant::Normal => (a * rec.xi, a * rec.xi),
                NoiseVariant::Negative => (-a * rec.xi.abs(), -a * rec.xi.abs()),
                NoiseVariant::Amplitude => (0.0, a * rec.xi.abs()),
            };
            if x_inflate != 0.0 || radial != 0.0 {
                let gy = g[y];
                let wx_ratio = rec.norm_w / rec.norm_x; // ||W||/||X||
                let xw_ratio = rec.norm_x / rec.norm_w;
                let dxrow = dx.row_mut(i);
                for k in 0..d {
                    // df^noise/dX - W_y = x_inflate * W_y - radial * ||W||/||X|| * X
                    dxrow[k] += gy * (x_inflate * wy[k] - radial * wx_ratio * xrow[k]);
                }
                let dwy = dw.row_mut(y);
                for k in 0..d {
                    dwy[k] += gy * (x_inflate * xrow[k] - radial * xw_ratio * wy[k]);
                }
            }
        }
    }

    Ok((dx, dw, db))
}

/// Mean true-class probability under the original, noise-free softmax.
/// This is the saturation proxy reported as `p_bar`.
///
/// Compensated summation keeps the uniform-head case exact: an all-zero
/// head yields exactly 1/C for every dataset size representable here.
pub fn average_prediction(head: &HeadParams, features: &Tensor, labels: &[usize]) -> Result<f64> {
    let n = features.shape().first().copied().unwrap_or(0);
    if n == 0 {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    if labels.len() != n {
        return Err(Error::Mismatch(format!(
            "{n} samples vs {} labels",
            labels.len()
        )));
    }
    let c = head.classes();
    let mut true_probs = Vec::with_capacity(n);
    for i in 0..n {
        let y = labels[i];
        if y >= c {
            return Err(Error::BadLabel {
                label: y,
                classes: c,
                sample: i,
            });
        }
        let logits = compute_logits(head, features.row(i))?;
        let probs = stable_softmax(&logits)?;
        true_probs.push(probs[y]);
    }
    Ok(numerics::neumaier_sum(true_probs) / n as f64)
}

/// Angle of the virtual training point that the noise-substituted logit
/// corresponds to: theta' = arccos((1 + a) cos theta - a) with a = alpha |xi|.
///
/// Computed as arccos(cos theta - a (1 - cos theta)), which is algebraically
/// identical and cannot exceed +1 by rounding. Zero noise returns theta
/// unchanged; the result is clamped to stay >= theta.
pub fn augmentation_angle(theta: f64, alpha: f64, xi_abs: f64) -> Result<f64> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::InvalidInput(format!(
            "theta must be in [0, pi], got {theta}"
        )));
    }
    if alpha < 0.0 || xi_abs < 0.0 {
        return Err(Error::InvalidInput(
            "alpha and |xi| must be non-negative".into(),
        ));
    }
    let a = alpha * xi_abs;
    if a == 0.0 {
        return Ok(theta);
    }
    let cos_t = theta.cos();
    let arg = cos_t - a * (1.0 - cos_t);
    if arg < -1.0 {
        return Err(Error::OutOfDomain(format!(
            "(1+a) cos theta - a = {arg} < -1 (theta={theta}, a={a})"
        )));
    }
    Ok(arg.acos().max(theta))
}
