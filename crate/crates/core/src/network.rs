//! Minimal feature extractor: dense layers, per-channel PReLU, and a small
//! 3x3-conv / 2x2-maxpool path for image inputs. Produces the flat feature
//! vector consumed by the classifier head.

use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

/// Per-sample data shape flowing between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataShape {
    Flat(usize),
    Image { c: usize, h: usize, w: usize },
}

impl DataShape {
    pub fn elems(&self) -> usize {
        match *self {
            DataShape::Flat(d) => d,
            DataShape::Image { c, h, w } => c * h * w,
        }
    }
}

/// Layer descriptors. Convolutions are fixed at 3x3, stride 1, pad 1;
/// pooling is fixed at 2x2, stride 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Dense { in_dim: usize, out_dim: usize },
    PRelu { channels: usize },
    Conv2d { in_ch: usize, out_ch: usize },
    MaxPool,
    Flatten,
}

impl std::fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            LayerSpec::Dense { in_dim, out_dim } => write!(f, "dense({in_dim},{out_dim})"),
            LayerSpec::PRelu { channels } => write!(f, "prelu({channels})"),
            LayerSpec::Conv2d { in_ch, out_ch } => write!(f, "conv2d({in_ch},{out_ch})"),
            LayerSpec::MaxPool => write!(f, "maxpool"),
            LayerSpec::Flatten => write!(f, "flatten"),
        }
    }
}

impl LayerSpec {
    /// Parse one descriptor: `dense(784,128)`, `prelu(128)`, `conv2d(1,8)`,
    /// `maxpool`, `flatten`.
    pub fn parse(s: &str) -> Result<LayerSpec> {
        let s = s.trim();
        let bad = |msg: &str| Error::InvalidConfig(format!("layer `{s}`: {msg}"));
        if let Some(rest) = s.strip_prefix("dense(") {
            let args = parse_args(rest, 2).map_err(|m| bad(&m))?;
            return Ok(LayerSpec::Dense {
                in_dim: args[0],
                out_dim: args[1],
            });
        }
        if let Some(rest) = s.strip_prefix("prelu(") {
            let args = parse_args(rest, 1).map_err(|m| bad(&m))?;
            return Ok(LayerSpec::PRelu { channels: args[0] });
        }
        if let Some(rest) = s.strip_prefix("conv2d(") {
            let args = parse_args(rest, 2).map_err(|m| bad(&m))?;
            return Ok(LayerSpec::Conv2d {
                in_ch: args[0],
                out_ch: args[1],
            });
        }
        match s {
            "maxpool" => Ok(LayerSpec::MaxPool),
            "flatten" => Ok(LayerSpec::Flatten),
            _ => Err(bad("unknown layer kind")),
        }
    }

    /// Parse a whitespace- and/or comma-separated descriptor list.
    pub fn parse_list(s: &str) -> Result<Vec<LayerSpec>> {
        let mut out = Vec::new();
        let mut depth = 0usize;
        let mut cur = String::new();
        for ch in s.chars() {
            match ch {
                '(' => {
                    depth += 1;
                    cur.push(ch);
                }
                ')' => {
                    depth = depth.saturating_sub(1);
                    cur.push(ch);
                }
                c if depth == 0 && (c == ',' || c.is_whitespace()) => {
                    if !cur.trim().is_empty() {
                        out.push(LayerSpec::parse(cur.trim())?);
                    }
                    cur.clear();
                }
                c => cur.push(c),
            }
        }
        if !cur.trim().is_empty() {
            out.push(LayerSpec::parse(cur.trim())?);
        }
        if out.is_empty() {
            return Err(Error::InvalidConfig("empty layer list".into()));
        }
        Ok(out)
    }

    /// Output shape for a given input shape, or the composition error.
    pub fn output_shape(&self, input: DataShape) -> Result<DataShape> {
        let mismatch = |msg: String| Error::Shape(format!("{self}: {msg}"));
        match *self {
            LayerSpec::Dense { in_dim, out_dim } => match input {
                DataShape::Flat(d) if d == in_dim => Ok(DataShape::Flat(out_dim)),
                other => Err(mismatch(format!("expected flat({in_dim}), got {other:?}"))),
            },
            LayerSpec::PRelu { channels } => match input {
                DataShape::Flat(d) if d == channels => Ok(input),
                DataShape::Image { c, .. } if c == channels => Ok(input),
                other => Err(mismatch(format!(
                    "expected {channels} channels, got {other:?}"
                ))),
            },
            LayerSpec::Conv2d { in_ch, out_ch } => match input {
                DataShape::Image { c, h, w } if c == in_ch => {
                    Ok(DataShape::Image { c: out_ch, h, w })
                }
                other => Err(mismatch(format!(
                    "expected image with {in_ch} channels, got {other:?}"
                ))),
            },
            LayerSpec::MaxPool => match input {
                DataShape::Image { c, h, w } if h % 2 == 0 && w % 2 == 0 && h > 0 && w > 0 => {
                    Ok(DataShape::Image {
                        c,
                        h: h / 2,
                        w: w / 2,
                    })
                }
                DataShape::Image { h, w, .. } => Err(mismatch(format!(
                    "pooling needs even spatial dims, got {h}x{w}"
                ))),
                other => Err(mismatch(format!("expected image, got {other:?}"))),
            },
            LayerSpec::Flatten => match input {
                DataShape::Image { .. } => Ok(DataShape::Flat(input.elems())),
                other => Err(mismatch(format!("expected image, got {other:?}"))),
            },
        }
    }
}

fn parse_args(rest: &str, want: usize) -> std::result::Result<Vec<usize>, String> {
    let Some(body) = rest.strip_suffix(')') else {
        return Err("missing closing parenthesis".into());
    };
    let parts: Vec<&str> = body.split(',').map(str::trim).collect();
    if parts.len() != want {
        return Err(format!("expected {want} arguments, got {}", parts.len()));
    }
    let mut args = Vec::with_capacity(want);
    for p in parts {
        let v: usize = p
            .parse()
            .map_err(|_| format!("`{p}` is not a positive integer"))?;
        if v == 0 {
            return Err(format!("`{p}` must be > 0"));
        }
        args.push(v);
    }
    Ok(args)
}

#[derive(Debug, Clone)]
pub enum LayerParams {
    Dense { w: Tensor, b: Tensor },
    PRelu { slopes: Tensor },
    Conv { w: Tensor, b: Tensor },
    Stateless,
}

/// What a parameter block is, which decides weight-decay treatment:
/// weights decay, biases and PReLU slopes do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Slope,
}

/// He initialization: weights ~ N(0, 2/fan_in), biases 0, PReLU slopes 0.25.
/// Weights are drawn in row-major order, one normal per element.
pub fn he_init(spec: &LayerSpec, rng: &mut Rng) -> LayerParams {
    match *spec {
        LayerSpec::Dense { in_dim, out_dim } => {
            let std = (2.0 / in_dim as f64).sqrt();
            let w: Vec<f64> = (0..out_dim * in_dim).map(|_| rng.normal() * std).collect();
            LayerParams::Dense {
                w: Tensor::from_vec(&[out_dim, in_dim], w).unwrap(),
                b: Tensor::zeros(&[out_dim]),
            }
        }
        LayerSpec::Conv2d { in_ch, out_ch } => {
            let fan_in = in_ch * 9;
            let std = (2.0 / fan_in as f64).sqrt();
            let w: Vec<f64> = (0..out_ch * in_ch * 9)
                .map(|_| rng.normal() * std)
                .collect();
            LayerParams::Conv {
                w: Tensor::from_vec(&[out_ch, in_ch, 3, 3], w).unwrap(),
                b: Tensor::zeros(&[out_ch]),
            }
        }
        LayerSpec::PRelu { channels } => LayerParams::PRelu {
            slopes: Tensor::filled(&[channels], 0.25),
        },
        LayerSpec::MaxPool | LayerSpec::Flatten => LayerParams::Stateless,
    }
}

/// Ordered layer stack mapping raw input batches to flat features.
#[derive(Debug, Clone)]
pub struct Network {
    input_shape: DataShape,
    specs: Vec<LayerSpec>,
    shapes: Vec<DataShape>, // shapes[i] = input shape of layer i; last = output
    params: Vec<LayerParams>,
}

enum LayerCache {
    Input(Tensor),
    Pool { argmax: Vec<u32> },
    None,
}

/// Intermediates from `Network::forward`, consumed by `Network::backward`.
pub struct ForwardCache {
    batch: usize,
    layers: Vec<LayerCache>,
}

/// Parameter gradients in `param_blocks` order.
pub struct NetGrads(pub Vec<Tensor>);

impl Network {
    /// Validate shape composition, then He-initialize every layer in order.
    /// The final shape must be flat: it feeds the classifier head.
    pub fn new(input_shape: DataShape, specs: &[LayerSpec], rng: &mut Rng) -> Result<Network> {
        if specs.is_empty() {
            return Err(Error::InvalidConfig(
                "network needs at least one layer".into(),
            ));
        }
        let mut shapes = vec![input_shape];
        for spec in specs {
            let next = spec.output_shape(*shapes.last().unwrap())?;
            shapes.push(next);
        }
        if !matches!(shapes.last(), Some(DataShape::Flat(_))) {
            return Err(Error::Shape(format!(
                "network must end in a flat feature vector, got {:?}",
                shapes.last().unwrap()
            )));
        }
        let params = specs.iter().map(|s| he_init(s, rng)).collect();
        Ok(Network {
            input_shape,
            specs: specs.to_vec(),
            shapes,
            params,
        })
    }

    pub fn input_shape(&self) -> DataShape {
        self.input_shape
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    /// Length of the feature vector the head consumes.
    pub fn feature_dim(&self) -> usize {
        self.shapes.last().unwrap().elems()
    }

    /// Parameter tensors in canonical order with stable names.
    pub fn param_blocks(&self) -> Vec<(String, ParamKind, &Tensor)> {
        let mut out = Vec::new();
        for (i, p) in self.params.iter().enumerate() {
            match p {
                LayerParams::Dense { w, b } | LayerParams::Conv { w, b } => {
                    out.push((format!("layer{i}.weight"), ParamKind::Weight, w));
                    out.push((format!("layer{i}.bias"), ParamKind::Bias, b));
                }
                LayerParams::PRelu { slopes } => {
                    out.push((format!("layer{i}.slope"), ParamKind::Slope, slopes));
                }
                LayerParams::Stateless => {}
            }
        }
        out
    }

    pub fn param_blocks_mut(&mut self) -> Vec<(String, ParamKind, &mut Tensor)> {
        let mut out = Vec::new();
        for (i, p) in self.params.iter_mut().enumerate() {
            match p {
                LayerParams::Dense { w, b } | LayerParams::Conv { w, b } => {
                    out.push((format!("layer{i}.weight"), ParamKind::Weight, w));
                    out.push((format!("layer{i}.bias"), ParamKind::Bias, b));
                }
                LayerParams::PRelu { slopes } => {
                    out.push((format!("layer{i}.slope"), ParamKind::Slope, slopes));
                }
                LayerParams::Stateless => {}
            }
        }
        out
    }

    /// Forward pass keeping every intermediate needed by `backward`.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ForwardCache)> {
        self.forward_impl(x, true)
    }

    /// Forward pass without caching, for evaluation.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_impl(x, false)?.0)
    }

    fn forward_impl(&self, x: &Tensor, keep: bool) -> Result<(Tensor, ForwardCache)> {
        let in_elems = self.input_shape.elems();
        if x.shape().len() != 2 || x.shape()[1] != in_elems {
            return Err(Error::Shape(format!(
                "input batch {:?} does not match network input of {} values",
                x.shape(),
                in_elems
            )));
        }
        let n = x.shape()[0];
        let mut cur = x.clone();
        let mut layers = Vec::with_capacity(self.specs.len());
        for (li, spec) in self.specs.iter().enumerate() {
            let shape_in = self.shapes[li];
            let shape_out = self.shapes[li + 1];
            let (next, cache) = match (spec, &self.params[li]) {
                (LayerSpec::Dense { .. }, LayerParams::Dense { w, b }) => {
                    let out = dense_forward(&cur, w, b, n);
                    (out, LayerCache::Input(cur))
                }
                (LayerSpec::PRelu { .. }, LayerParams::PRelu { slopes }) => {
                    let out = prelu_forward(&cur, slopes, shape_in, n);
                    (out, LayerCache::Input(cur))
                }
                (LayerSpec::Conv2d { .. }, LayerParams::Conv { w, b }) => {
                    let out = conv_forward(&cur, w, b, shape_in, shape_out, n);
                    (out, LayerCache::Input(cur))
                }
                (LayerSpec::MaxPool, _) => {
                    let (out, argmax) = pool_forward(&cur, shape_in, shape_out, n);
                    (out, LayerCache::Pool { argmax })
                }
                (LayerSpec::Flatten, _) => {
                    let out = cur.clone().reshape(&[n, shape_out.elems()])?;
                    (out, LayerCache::None)
                }
                _ => unreachable!("layer spec and params always built together"),
            };
            layers.push(if keep { cache } else { LayerCache::None });
            cur = next;
        }
        Ok((cur, ForwardCache { batch: n, layers }))
    }

    /// Backward pass: gradients for every parameter plus the input gradient.
    pub fn backward(&self, cache: &ForwardCache, d_out: &Tensor) -> Result<(NetGrads, Tensor)> {
        let n = cache.batch;
        if cache.layers.len() != self.specs.len() {
            return Err(Error::Mismatch(format!(
                "cache has {} layers, network has {}",
                cache.layers.len(),
                self.specs.len()
            )));
        }
        let out_elems = self.shapes.last().unwrap().elems();
        if d_out.shape() != [n, out_elems] {
            return Err(Error::Mismatch(format!(
                "upstream gradient {:?} does not match output [{n}, {out_elems}]",
                d_out.shape()
            )));
        }

        let mut grads_rev: Vec<Vec<Tensor>> = Vec::with_capacity(self.specs.len());
        let mut d_cur = d_out.clone();
        for li in (0..self.specs.len()).rev() {
            let shape_in = self.shapes[li];
            let shape_out = self.shapes[li + 1];
            let (d_prev, layer_grads) = match (&self.specs[li], &self.params[li], &cache.layers[li])
            {
                (LayerSpec::Dense { .. }, LayerParams::Dense { w, .. }, LayerCache::Input(x)) => {
                    let (dx, dw, db) = dense_backward(x, w, &d_cur, n);
                    (dx, vec![dw, db])
                }
                (LayerSpec::PRelu { .. }, LayerParams::PRelu { slopes }, LayerCache::Input(x)) => {
                    let (dx, ds) = prelu_backward(x, slopes, &d_cur, shape_in, n);
                    (dx, vec![ds])
                }
                (LayerSpec::Conv2d { .. }, LayerParams::Conv { w, .. }, LayerCache::Input(x)) => {
                    let (dx, dw, db) = conv_backward(x, w, &d_cur, shape_in, shape_out, n);
                    (dx, vec![dw, db])
                }
                (LayerSpec::MaxPool, _, LayerCache::Pool { argmax }) => {
                    let dx = pool_backward(&d_cur, argmax, shape_in, n);
                    (dx, vec![])
                }
                (LayerSpec::Flatten, _, LayerCache::None) => {
                    let dx = d_cur.clone().reshape(&[n, shape_in.elems()])?;
                    (dx, vec![])
                }
                _ => {
                    return Err(Error::Mismatch(format!(
                        "cache entry for layer {li} does not match {} (was the cache \
                         produced by forward() on this network?)",
                        self.specs[li]
                    )))
                }
            };
            grads_rev.push(layer_grads);
            d_cur = d_prev;
        }
        let mut grads = Vec::new();
        for layer_grads in grads_rev.into_iter().rev() {
            grads.extend(layer_grads);
        }
        Ok((NetGrads(grads), d_cur))
    }
}

fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor, n: usize) -> Tensor {
    let out_dim = w.shape()[0];
    let in_dim = w.shape()[1];
    let mut y = Tensor::zeros(&[n, out_dim]);
    for i in 0..n {
        let xr = x.row(i);
        let yr = y.row_mut(i);
        for o in 0..out_dim {
            let wr = &w.data()[o * in_dim..(o + 1) * in_dim];
            let mut acc = 0.0;
            for k in 0..in_dim {
                acc += wr[k] * xr[k];
            }
            yr[o] = acc + b.data()[o];
        }
    }
    y
}

fn dense_backward(x: &Tensor, w: &Tensor, dy: &Tensor, n: usize) -> (Tensor, Tensor, Tensor) {
    let out_dim = w.shape()[0];
    let in_dim = w.shape()[1];
    let mut dx = Tensor::zeros(&[n, in_dim]);
    let mut dw = Tensor::zeros(&[out_dim, in_dim]);
    let mut db = Tensor::zeros(&[out_dim]);
    for i in 0..n {
        let xr = x.row(i);
        let dyr = dy.row(i);
        let dxr = dx.row_mut(i);
        for o in 0..out_dim {
            let g = dyr[o];
            if g == 0.0 {
                continue;
            }
            db.data_mut()[o] += g;
            let wr = &w.data()[o * in_dim..(o + 1) * in_dim];
            let dwr = &mut dw.data_mut()[o * in_dim..(o + 1) * in_dim];
            for k in 0..in_dim {
                dxr[k] += g * wr[k];
                dwr[k] += g * xr[k];
            }
        }
    }
    (dx, dw, db)
}

fn channel_of(idx: usize, shape: DataShape) -> usize {
    match shape {
        DataShape::Flat(_) => idx,
        DataShape::Image { h, w, .. } => idx / (h * w),
    }
}

fn prelu_forward(x: &Tensor, slopes: &Tensor, shape: DataShape, n: usize) -> Tensor {
    let elems = shape.elems();
    let mut y = Tensor::zeros(&[n, elems]);
    for i in 0..n {
        let xr = x.row(i);
        let yr = y.row_mut(i);
        for k in 0..elems {
            let v = xr[k];
            yr[k] = if v > 0.0 {
                v
            } else {
                slopes.data()[channel_of(k, shape)] * v
            };
        }
    }
    y
}

fn prelu_backward(
    x: &Tensor,
    slopes: &Tensor,
    dy: &Tensor,
    shape: DataShape,
    n: usize,
) -> (Tensor, Tensor) {
    let elems = shape.elems();
    let mut dx = Tensor::zeros(&[n, elems]);
    let mut ds = Tensor::zeros(slopes.shape());
    for i in 0..n {
        let xr = x.row(i);
        let dyr = dy.row(i);
        let dxr = dx.row_mut(i);
        for k in 0..elems {
            let v = xr[k];
            let ch = channel_of(k, shape);
            if v > 0.0 {
                dxr[k] = dyr[k];
            } else {
                dxr[k] = dyr[k] * slopes.data()[ch];
                ds.data_mut()[ch] += dyr[k] * v;
            }
        }
    }
    (dx, ds)
}

fn conv_forward(
    x: &Tensor,
    w: &Tensor,
    b: &Tensor,
    shape_in: DataShape,
    shape_out: DataShape,
    n: usize,
) -> Tensor {
    let DataShape::Image { c: ic, h, w: wd } = shape_in else {
        unreachable!()
    };
    let DataShape::Image { c: oc, .. } = shape_out else {
        unreachable!()
    };
    let mut y = Tensor::zeros(&[n, oc * h * wd]);
    for i in 0..n {
        let xr = x.row(i);
        let yr = y.row_mut(i);
        for o in 0..oc {
            let plane = &mut yr[o * h * wd..(o + 1) * h * wd];
            plane.fill(b.data()[o]);
            for c in 0..ic {
                let xplane = &xr[c * h * wd..(c + 1) * h * wd];
                let kernel = &w.data()[(o * ic + c) * 9..(o * ic + c + 1) * 9];
                for (ki, kj) in kernel_offsets() {
                    let k = kernel[((ki + 1) * 3 + (kj + 1)) as usize];
                    if k == 0.0 {
                        continue;
                    }
                    accumulate_shifted(plane, xplane, h, wd, ki, kj, k);
                }
            }
        }
    }
    y
}

fn kernel_offsets() -> impl Iterator<Item = (i64, i64)> {
    (-1i64..=1).flat_map(|ki| (-1i64..=1).map(move |kj| (ki, kj)))
}

/// plane[i][j] += k * src[i+ki][j+kj] with zero padding outside.
fn accumulate_shifted(
    plane: &mut [f64],
    src: &[f64],
    h: usize,
    w: usize,
    ki: i64,
    kj: i64,
    k: f64,
) {
    let (h, w) = (h as i64, w as i64);
    for i in 0..h {
        let si = i + ki;
        if si < 0 || si >= h {
            continue;
        }
        let j_lo = 0.max(-kj);
        let j_hi = w.min(w - kj);
        for j in j_lo..j_hi {
            plane[(i * w + j) as usize] += k * src[(si * w + j + kj) as usize];
        }
    }
}

fn conv_backward(
    x: &Tensor,
    w: &Tensor,
    dy: &Tensor,
    shape_in: DataShape,
    shape_out: DataShape,
    n: usize,
) -> (Tensor, Tensor, Tensor) {
    let DataShape::Image { c: ic, h, w: wd } = shape_in else {
        unreachable!()
    };
    let DataShape::Image { c: oc, .. } = shape_out else {
        unreachable!()
    };
    let mut dx = Tensor::zeros(&[n, ic * h * wd]);
    let mut dw = Tensor::zeros(&[oc, ic, 3, 3]);
    let mut db = Tensor::zeros(&[oc]);
    let (hi, wi) = (h as i64, wd as i64);
    for i in 0..n {
        let xr = x.row(i);
        let dyr = dy.row(i);
        let dxr = dx.row_mut(i);
        for o in 0..oc {
            let dplane = &dyr[o * h * wd..(o + 1) * h * wd];
            db.data_mut()[o] += dplane.iter().sum::<f64>();
            for c in 0..ic {
                let xplane = &xr[c * h * wd..(c + 1) * h * wd];
                let dxplane = &mut dxr[c * h * wd..(c + 1) * h * wd];
                let kbase = (o * ic + c) * 9;
                for (ki, kj) in kernel_offsets() {
                    let kidx = kbase + ((ki + 1) * 3 + (kj + 1)) as usize;
                    let kval = w.data()[kidx];
                    let mut kgrad = 0.0;
                    for ii in 0..hi {
                        let si = ii + ki;
                        if si < 0 || si >= hi {
                            continue;
                        }
                        let j_lo = 0.max(-kj);
                        let j_hi = wi.min(wi - kj);
                        for jj in j_lo..j_hi {
                            let g = dplane[(ii * wi + jj) as usize];
                            let xi = (si * wi + jj + kj) as usize;
                            kgrad += g * xplane[xi];
                            dxplane[xi] += g * kval;
                        }
                    }
                    dw.data_mut()[kidx] += kgrad;
                }
            }
        }
    }
    (dx, dw, db)
}

fn pool_forward(
    x: &Tensor,
    shape_in: DataShape,
    shape_out: DataShape,
    n: usize,
) -> (Tensor, Vec<u32>) {
    let DataShape::Image { c, h, w } = shape_in else {
        unreachable!()
    };
    let (oh, ow) = match shape_out {
        DataShape::Image { h, w, .. } => (h, w),
        _ => unreachable!(),
    };
    let mut y = Tensor::zeros(&[n, c * oh * ow]);
    let mut argmax = vec![0u32; n * c * oh * ow];
    for i in 0..n {
        let xr = x.row(i);
        let yr = y.row_mut(i);
        for ch in 0..c {
            for oi in 0..oh {
                for oj in 0..ow {
                    // ties resolve to the first position in scan order
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0usize;
                    for di in 0..2 {
                        for dj in 0..2 {
                            let idx = ch * h * w + (2 * oi + di) * w + (2 * oj + dj);
                            if xr[idx] > best {
                                best = xr[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let out_idx = ch * oh * ow + oi * ow + oj;
                    yr[out_idx] = best;
                    argmax[i * c * oh * ow + out_idx] = best_idx as u32;
                }
            }
        }
    }
    (y, argmax)
}

fn pool_backward(dy: &Tensor, argmax: &[u32], shape_in: DataShape, n: usize) -> Tensor {
    let in_elems = shape_in.elems();
    let out_elems = dy.shape()[1];
    let mut dx = Tensor::zeros(&[n, in_elems]);
    for i in 0..n {
        let dyr = dy.row(i);
        let dxr = dx.row_mut(i);
        for k in 0..out_elems {
            dxr[argmax[i * out_elems + k] as usize] += dyr[k];
        }
    }
    dx
}

/// The desk-scale MLP for 28x28 inputs: 784 -> 128 -> PReLU -> 64.
pub fn desk_mlp() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Flatten,
        LayerSpec::Dense {
            in_dim: 784,
            out_dim: 128,
        },
        LayerSpec::PRelu { channels: 128 },
        LayerSpec::Dense {
            in_dim: 128,
            out_dim: 64,
        },
    ]
}

/// The desk-scale CNN: two conv/PReLU/pool stages then a 64-d dense feature.
pub fn desk_cnn() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv2d { in_ch: 1, out_ch: 8 },
        LayerSpec::PRelu { channels: 8 },
        LayerSpec::MaxPool,
        LayerSpec::Conv2d {
            in_ch: 8,
            out_ch: 16,
        },
        LayerSpec::PRelu { channels: 16 },
        LayerSpec::MaxPool,
        LayerSpec::Flatten,
        LayerSpec::Dense {
            in_dim: 16 * 7 * 7,
            out_dim: 64,
        },
        LayerSpec::PRelu { channels: 64 },
    ]
}
