//! Layer kinds: dense, 2-D convolution, transposed convolution, activations,
//! and shape plumbing. Convolutions run as im2col/col2im plus a matrix
//! product; the transposed convolution stores its weights in the layout of
//! the mirror convolution so forward/backward are exact adjoints.

use crate::error::{Error, Result};
use crate::tensor::{matmul, matmul_a_bt, matmul_at_b, Scalar, Tensor};

/// Elementwise (or rowwise, for softmax) nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// Leaky ReLU with fixed negative slope 0.2.
    LeakyRelu,
    Tanh,
    Sigmoid,
    /// Rowwise softmax over the last axis; only valid as a final layer.
    Softmax,
    Linear,
}

/// Negative slope of [`Activation::LeakyRelu`].
pub const LEAKY_SLOPE: f64 = 0.2;

/// One layer of a feed-forward network. Tensors flow batch-first:
/// `[N, features]` for dense layers, `[N, C, H, W]` for convolutions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    Dense { fan_in: usize, fan_out: usize },
    Conv2d { in_ch: usize, out_ch: usize, kernel: usize, stride: usize, padding: usize },
    TConv2d { in_ch: usize, out_ch: usize, kernel: usize, stride: usize, padding: usize },
    Activation(Activation),
    /// `[N, C, H, W]` → `[N, C·H·W]`.
    Flatten,
    /// `[N, F]` → `[N, dims...]` with matching per-sample element count.
    Reshape { dims: Vec<usize> },
}

/// Weight and bias of one parameterized layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPair<S: Scalar = f32> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
}

impl LayerSpec {
    /// Weight/bias shapes, or `None` for parameterless layers.
    ///
    /// Dense weights are `[fan_out, fan_in]`; convolution weights are
    /// `[out_ch, in_ch·k·k]`; transposed-convolution weights are stored in
    /// mirror-convolution layout `[in_ch, out_ch·k·k]`.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Dense { fan_in, fan_out } => Some((vec![fan_out, fan_in], vec![fan_out])),
            LayerSpec::Conv2d { in_ch, out_ch, kernel, .. } => {
                Some((vec![out_ch, in_ch * kernel * kernel], vec![out_ch]))
            }
            LayerSpec::TConv2d { in_ch, out_ch, kernel, .. } => {
                Some((vec![in_ch, out_ch * kernel * kernel], vec![out_ch]))
            }
            _ => None,
        }
    }

    /// Xavier/Glorot uniform bound √(6/(fan_in+fan_out)); convolution fans
    /// count the receptive field, so conv and its transpose share a bound.
    pub fn init_bound(&self) -> Option<f64> {
        let (fi, fo) = match *self {
            LayerSpec::Dense { fan_in, fan_out } => (fan_in, fan_out),
            LayerSpec::Conv2d { in_ch, out_ch, kernel, .. }
            | LayerSpec::TConv2d { in_ch, out_ch, kernel, .. } => {
                (in_ch * kernel * kernel, out_ch * kernel * kernel)
            }
            _ => return None,
        };
        Some((6.0 / (fi + fo) as f64).sqrt())
    }

    /// Output shape for a batched input shape, or a composition error.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |msg: String| Err(Error::ShapeMismatch(msg));
        match self {
            LayerSpec::Dense { fan_in, fan_out } => {
                if input.len() != 2 || input[1] != *fan_in {
                    return bad(format!("dense({fan_in}->{fan_out}) got input {input:?}"));
                }
                Ok(vec![input[0], *fan_out])
            }
            LayerSpec::Conv2d { in_ch, out_ch, kernel, stride, padding } => {
                let (h, w) = conv_input_hw(input, *in_ch, "conv2d")?;
                let (ho, wo) = conv_out_hw(h, w, *kernel, *stride, *padding)?;
                Ok(vec![input[0], *out_ch, ho, wo])
            }
            LayerSpec::TConv2d { in_ch, out_ch, kernel, stride, padding } => {
                let (h, w) = conv_input_hw(input, *in_ch, "tconv2d")?;
                let ho = (h - 1) * stride + kernel - 2 * padding;
                let wo = (w - 1) * stride + kernel - 2 * padding;
                Ok(vec![input[0], *out_ch, ho, wo])
            }
            LayerSpec::Activation(Activation::Softmax) => {
                if input.len() != 2 {
                    return bad(format!("softmax expects [N, K], got {input:?}"));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Activation(_) => Ok(input.to_vec()),
            LayerSpec::Flatten => {
                if input.len() < 2 {
                    return bad(format!("flatten expects a batched input, got {input:?}"));
                }
                Ok(vec![input[0], input[1..].iter().product()])
            }
            LayerSpec::Reshape { dims } => {
                if input.len() < 2 || input[1..].iter().product::<usize>() != dims.iter().product()
                {
                    return bad(format!("cannot reshape {input:?} to [N, {dims:?}]"));
                }
                let mut out = vec![input[0]];
                out.extend_from_slice(dims);
                Ok(out)
            }
        }
    }

    /// Forward pass. `params` must be `Some` exactly for parameterized layers.
    pub fn forward<S: Scalar>(&self, params: Option<&ParamPair<S>>, x: &Tensor<S>) -> Result<Tensor<S>> {
        let out_shape = self.output_shape(x.shape())?;
        match self {
            LayerSpec::Dense { fan_in, fan_out } => {
                let pp = params.expect("dense layer has params");
                let n = x.shape()[0];
                // y = x·Wᵀ + b with W [fan_out, fan_in]
                let mut y = matmul_a_bt(x.data(), pp.weight.data(), n, *fan_in, *fan_out);
                for row in y.chunks_exact_mut(*fan_out) {
                    for (v, b) in row.iter_mut().zip(pp.bias.data()) {
                        *v += *b;
                    }
                }
                Tensor::from_vec(&out_shape, y)
            }
            LayerSpec::Conv2d { in_ch, out_ch, kernel, stride, padding } => {
                let pp = params.expect("conv2d layer has params");
                let (n, h, w) = (x.shape()[0], x.shape()[2], x.shape()[3]);
                let (ho, wo) = (out_shape[2], out_shape[3]);
                let ckk = in_ch * kernel * kernel;
                let mut y = vec![S::zero(); n * out_ch * ho * wo];
                let mut cols = vec![S::zero(); ckk * ho * wo];
                for s in 0..n {
                    let xs = &x.data()[s * in_ch * h * w..(s + 1) * in_ch * h * w];
                    im2col(xs, *in_ch, h, w, *kernel, *stride, *padding, ho, wo, &mut cols);
                    let ys = matmul(pp.weight.data(), &cols, *out_ch, ckk, ho * wo);
                    let dst = &mut y[s * out_ch * ho * wo..(s + 1) * out_ch * ho * wo];
                    dst.copy_from_slice(&ys);
                    for c in 0..*out_ch {
                        let b = pp.bias.data()[c];
                        for v in &mut dst[c * ho * wo..(c + 1) * ho * wo] {
                            *v += b;
                        }
                    }
                }
                Tensor::from_vec(&out_shape, y)
            }
            LayerSpec::TConv2d { in_ch, out_ch, kernel, stride, padding } => {
                let pp = params.expect("tconv2d layer has params");
                let (n, h, w) = (x.shape()[0], x.shape()[2], x.shape()[3]);
                let (ho, wo) = (out_shape[2], out_shape[3]);
                let ckk = out_ch * kernel * kernel;
                let mut y = vec![S::zero(); n * out_ch * ho * wo];
                for s in 0..n {
                    let xs = &x.data()[s * in_ch * h * w..(s + 1) * in_ch * h * w];
                    // cols = Wᵀ·x, then scatter-add into the output grid: the
                    // exact adjoint of the mirror convolution's forward pass.
                    let cols = matmul_at_b(pp.weight.data(), xs, *in_ch, ckk, h * w);
                    let ys = &mut y[s * out_ch * ho * wo..(s + 1) * out_ch * ho * wo];
                    col2im(&cols, *out_ch, ho, wo, *kernel, *stride, *padding, h, w, ys);
                    for c in 0..*out_ch {
                        let b = pp.bias.data()[c];
                        for v in &mut ys[c * ho * wo..(c + 1) * ho * wo] {
                            *v += b;
                        }
                    }
                }
                Tensor::from_vec(&out_shape, y)
            }
            LayerSpec::Activation(act) => activation_forward(*act, x),
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => {
                x.clone().reshaped(&out_shape)
            }
        }
    }

    /// Backward pass: given the recorded input `x`, output `y`, and upstream
    /// gradient `dy`, returns parameter gradients (if any) and the input
    /// gradient.
    pub fn backward<S: Scalar>(
        &self,
        params: Option<&ParamPair<S>>,
        x: &Tensor<S>,
        y: &Tensor<S>,
        dy: &Tensor<S>,
    ) -> Result<(Option<ParamPair<S>>, Tensor<S>)> {
        match self {
            LayerSpec::Dense { fan_in, fan_out } => {
                let pp = params.expect("dense layer has params");
                let n = x.shape()[0];
                // dx = dy·W ; dW = dyᵀ·x ; db = column sums of dy
                let dx = matmul(dy.data(), pp.weight.data(), n, *fan_out, *fan_in);
                let dw = matmul_at_b(dy.data(), x.data(), n, *fan_out, *fan_in);
                let mut db = vec![S::zero(); *fan_out];
                for row in dy.data().chunks_exact(*fan_out) {
                    for (d, v) in db.iter_mut().zip(row) {
                        *d += *v;
                    }
                }
                Ok((
                    Some(ParamPair {
                        weight: Tensor::from_vec(&[*fan_out, *fan_in], dw)?,
                        bias: Tensor::from_vec(&[*fan_out], db)?,
                    }),
                    Tensor::from_vec(x.shape(), dx)?,
                ))
            }
            LayerSpec::Conv2d { in_ch, out_ch, kernel, stride, padding } => {
                let pp = params.expect("conv2d layer has params");
                let (n, h, w) = (x.shape()[0], x.shape()[2], x.shape()[3]);
                let (ho, wo) = (dy.shape()[2], dy.shape()[3]);
                let ckk = in_ch * kernel * kernel;
                let mut dw = vec![S::zero(); out_ch * ckk];
                let mut db = vec![S::zero(); *out_ch];
                let mut dx = vec![S::zero(); n * in_ch * h * w];
                let mut cols = vec![S::zero(); ckk * ho * wo];
                for s in 0..n {
                    let xs = &x.data()[s * in_ch * h * w..(s + 1) * in_ch * h * w];
                    let dys = &dy.data()[s * out_ch * ho * wo..(s + 1) * out_ch * ho * wo];
                    im2col(xs, *in_ch, h, w, *kernel, *stride, *padding, ho, wo, &mut cols);
                    // dW += dy·colsᵀ
                    let dws = matmul_a_bt(dys, &cols, *out_ch, ho * wo, ckk);
                    for (a, b) in dw.iter_mut().zip(&dws) {
                        *a += *b;
                    }
                    for c in 0..*out_ch {
                        for v in &dys[c * ho * wo..(c + 1) * ho * wo] {
                            db[c] += *v;
                        }
                    }
                    // dx = col2im(Wᵀ·dy)
                    let dcols = matmul_at_b(pp.weight.data(), dys, *out_ch, ckk, ho * wo);
                    let dxs = &mut dx[s * in_ch * h * w..(s + 1) * in_ch * h * w];
                    col2im(&dcols, *in_ch, h, w, *kernel, *stride, *padding, ho, wo, dxs);
                }
                Ok((
                    Some(ParamPair {
                        weight: Tensor::from_vec(&[*out_ch, ckk], dw)?,
                        bias: Tensor::from_vec(&[*out_ch], db)?,
                    }),
                    Tensor::from_vec(x.shape(), dx)?,
                ))
            }
            LayerSpec::TConv2d { in_ch, out_ch, kernel, stride, padding } => {
                let pp = params.expect("tconv2d layer has params");
                let (n, h, w) = (x.shape()[0], x.shape()[2], x.shape()[3]);
                let (ho, wo) = (dy.shape()[2], dy.shape()[3]);
                let ckk = out_ch * kernel * kernel;
                let mut dw = vec![S::zero(); in_ch * ckk];
                let mut db = vec![S::zero(); *out_ch];
                let mut dx = vec![S::zero(); n * in_ch * h * w];
                let mut cols = vec![S::zero(); ckk * h * w];
                for s in 0..n {
                    let xs = &x.data()[s * in_ch * h * w..(s + 1) * in_ch * h * w];
                    let dys = &dy.data()[s * out_ch * ho * wo..(s + 1) * out_ch * ho * wo];
                    // backward-data is the mirror convolution run forward on dy
                    im2col(dys, *out_ch, ho, wo, *kernel, *stride, *padding, h, w, &mut cols);
                    let dxs = matmul(pp.weight.data(), &cols, *in_ch, ckk, h * w);
                    dx[s * in_ch * h * w..(s + 1) * in_ch * h * w].copy_from_slice(&dxs);
                    // dW += x·colsᵀ
                    let dws = matmul_a_bt(xs, &cols, *in_ch, h * w, ckk);
                    for (a, b) in dw.iter_mut().zip(&dws) {
                        *a += *b;
                    }
                    for c in 0..*out_ch {
                        for v in &dys[c * ho * wo..(c + 1) * ho * wo] {
                            db[c] += *v;
                        }
                    }
                }
                Ok((
                    Some(ParamPair {
                        weight: Tensor::from_vec(&[*in_ch, ckk], dw)?,
                        bias: Tensor::from_vec(&[*out_ch], db)?,
                    }),
                    Tensor::from_vec(x.shape(), dx)?,
                ))
            }
            LayerSpec::Activation(act) => Ok((None, activation_backward(*act, x, y, dy)?)),
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => {
                Ok((None, dy.clone().reshaped(x.shape())?))
            }
        }
    }
}

fn conv_input_hw(input: &[usize], in_ch: usize, kind: &str) -> Result<(usize, usize)> {
    if input.len() != 4 || input[1] != in_ch {
        return Err(Error::ShapeMismatch(format!(
            "{kind} expects [N, {in_ch}, H, W], got {input:?}"
        )));
    }
    Ok((input[2], input[3]))
}

fn conv_out_hw(h: usize, w: usize, k: usize, s: usize, p: usize) -> Result<(usize, usize)> {
    if h + 2 * p < k || w + 2 * p < k {
        return Err(Error::ShapeMismatch(format!(
            "kernel {k} exceeds padded input {h}x{w} (padding {p})"
        )));
    }
    Ok(((h + 2 * p - k) / s + 1, (w + 2 * p - k) / s + 1))
}

/// Unfolds one sample `[C, H, W]` into `cols[C·k·k, ho·wo]`, zero-padding
/// out-of-bounds taps.
#[allow(clippy::too_many_arguments)]
fn im2col<S: Scalar>(
    x: &[S],
    c_in: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
    cols: &mut [S],
) {
    debug_assert_eq!(cols.len(), c_in * k * k * ho * wo);
    for c in 0..c_in {
        for ki in 0..k {
            for kj in 0..k {
                let row = ((c * k + ki) * k + kj) * ho * wo;
                for oi in 0..ho {
                    let ii = (oi * stride + ki) as isize - pad as isize;
                    for oj in 0..wo {
                        let jj = (oj * stride + kj) as isize - pad as isize;
                        cols[row + oi * wo + oj] =
                            if ii >= 0 && ii < h as isize && jj >= 0 && jj < w as isize {
                                x[(c * h + ii as usize) * w + jj as usize]
                            } else {
                                S::zero()
                            };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds `cols[C·k·k, ho·wo]` back into the
/// `[C, H, W]` image grid. `out` must be zeroed by the caller.
#[allow(clippy::too_many_arguments)]
fn col2im<S: Scalar>(
    cols: &[S],
    c_in: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
    out: &mut [S],
) {
    debug_assert_eq!(cols.len(), c_in * k * k * ho * wo);
    debug_assert_eq!(out.len(), c_in * h * w);
    for c in 0..c_in {
        for ki in 0..k {
            for kj in 0..k {
                let row = ((c * k + ki) * k + kj) * ho * wo;
                for oi in 0..ho {
                    let ii = (oi * stride + ki) as isize - pad as isize;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    for oj in 0..wo {
                        let jj = (oj * stride + kj) as isize - pad as isize;
                        if jj < 0 || jj >= w as isize {
                            continue;
                        }
                        out[(c * h + ii as usize) * w + jj as usize] += cols[row + oi * wo + oj];
                    }
                }
            }
        }
    }
}

fn activation_forward<S: Scalar>(act: Activation, x: &Tensor<S>) -> Result<Tensor<S>> {
    let slope = S::from_f64c(LEAKY_SLOPE);
    let mut data = x.data().to_vec();
    match act {
        Activation::Relu => {
            for v in &mut data {
                if *v < S::zero() {
                    *v = S::zero();
                }
            }
        }
        Activation::LeakyRelu => {
            for v in &mut data {
                if *v < S::zero() {
                    *v *= slope;
                }
            }
        }
        Activation::Tanh => {
            for v in &mut data {
                *v = v.tanh();
            }
        }
        Activation::Sigmoid => {
            for v in &mut data {
                *v = S::one() / (S::one() + (-*v).exp());
            }
        }
        Activation::Softmax => {
            let k = x.shape()[1];
            for row in data.chunks_exact_mut(k) {
                let max = row.iter().cloned().fold(S::neg_infinity(), S::max);
                let mut sum = S::zero();
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                for v in row.iter_mut() {
                    *v = *v / sum;
                }
            }
        }
        Activation::Linear => {}
    }
    Tensor::from_vec(x.shape(), data)
}

fn activation_backward<S: Scalar>(
    act: Activation,
    x: &Tensor<S>,
    y: &Tensor<S>,
    dy: &Tensor<S>,
) -> Result<Tensor<S>> {
    let slope = S::from_f64c(LEAKY_SLOPE);
    let mut dx = dy.data().to_vec();
    match act {
        Activation::Relu => {
            for (d, xv) in dx.iter_mut().zip(x.data()) {
                if *xv <= S::zero() {
                    *d = S::zero();
                }
            }
        }
        Activation::LeakyRelu => {
            for (d, xv) in dx.iter_mut().zip(x.data()) {
                if *xv <= S::zero() {
                    *d *= slope;
                }
            }
        }
        Activation::Tanh => {
            for (d, yv) in dx.iter_mut().zip(y.data()) {
                *d *= S::one() - *yv * *yv;
            }
        }
        Activation::Sigmoid => {
            for (d, yv) in dx.iter_mut().zip(y.data()) {
                *d *= *yv * (S::one() - *yv);
            }
        }
        Activation::Softmax => {
            // dx = y ⊙ (dy − ⟨dy, y⟩) rowwise
            let k = x.shape()[1];
            for (drow, yrow) in dx.chunks_exact_mut(k).zip(y.data().chunks_exact(k)) {
                let mut dot = S::zero();
                for (d, yv) in drow.iter().zip(yrow) {
                    dot += *d * *yv;
                }
                for (d, yv) in drow.iter_mut().zip(yrow) {
                    *d = *yv * (*d - dot);
                }
            }
        }
        Activation::Linear => {}
    }
    Tensor::from_vec(x.shape(), dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn conv_of_ones_with_unit_kernel_sums_receptive_field() {
        // 3×3 image of ones, 2×2 kernel of ones, stride 1, no padding → 2×2 of 4s
        let spec = LayerSpec::Conv2d { in_ch: 1, out_ch: 1, kernel: 2, stride: 1, padding: 0 };
        let pp = ParamPair {
            weight: Tensor::<f64>::full(&[1, 4], 1.0),
            bias: Tensor::zeros(&[1]),
        };
        let x = Tensor::full(&[1, 1, 3, 3], 1.0);
        let y = spec.forward(Some(&pp), &x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.data(), &[4.0, 4.0, 4.0, 4.0]);
    }

    #[test]
    fn identity_dense_layer_passes_input_through() {
        let spec = LayerSpec::Dense { fan_in: 3, fan_out: 3 };
        let mut w = Tensor::<f64>::zeros(&[3, 3]);
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        let pp = ParamPair { weight: w, bias: Tensor::zeros(&[3]) };
        let x = Tensor::from_vec(&[1, 3], vec![0.3, -1.2, 7.0]).unwrap();
        let y = spec.forward(Some(&pp), &x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let spec = LayerSpec::Activation(Activation::Softmax);
        let x = Tensor::<f64>::zeros(&[1, 3]);
        let y = spec.forward(None, &x).unwrap();
        for v in y.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one_for_large_logits() {
        let spec = LayerSpec::Activation(Activation::Softmax);
        let x = Tensor::<f64>::from_vec(&[2, 3], vec![500.0, -500.0, 3.0, 0.1, 0.2, 0.3]).unwrap();
        let y = spec.forward(None, &x).unwrap();
        for row in y.data().chunks_exact(3) {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn transposed_conv_is_adjoint_of_mirror_conv() {
        // ⟨tconv(x), y⟩ == ⟨x, conv(y)⟩ when both share the same weight matrix:
        // the defining property of the transposed convolution.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (cin, cout, k, s, p) = (3, 2, 4, 2, 1);
        let (h, w) = (5, 6);
        let (ho, wo) = ((h - 1) * s + k - 2 * p, (w - 1) * s + k - 2 * p);
        let tspec = LayerSpec::TConv2d { in_ch: cin, out_ch: cout, kernel: k, stride: s, padding: p };
        let cspec = LayerSpec::Conv2d { in_ch: cout, out_ch: cin, kernel: k, stride: s, padding: p };
        let weight = rand_tensor(&mut rng, &[cin, cout * k * k]);
        let tpp = ParamPair { weight: weight.clone(), bias: Tensor::zeros(&[cout]) };
        let cpp = ParamPair { weight, bias: Tensor::zeros(&[cin]) };
        let x = rand_tensor(&mut rng, &[1, cin, h, w]);
        let y = rand_tensor(&mut rng, &[1, cout, ho, wo]);
        let tx = tspec.forward(Some(&tpp), &x).unwrap();
        let cy = cspec.forward(Some(&cpp), &y).unwrap();
        let lhs: f64 = tx.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(cy.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9, "adjoint identity violated: {lhs} vs {rhs}");
    }

    #[test]
    fn tconv_output_shape_inverts_conv_shape() {
        // 7 →(tconv k4 s2 p1)→ 14 → 28, mirroring the 28→14→7 encoder path.
        let t = LayerSpec::TConv2d { in_ch: 1, out_ch: 1, kernel: 4, stride: 2, padding: 1 };
        assert_eq!(t.output_shape(&[1, 1, 7, 7]).unwrap(), vec![1, 1, 14, 14]);
        assert_eq!(t.output_shape(&[1, 1, 14, 14]).unwrap(), vec![1, 1, 28, 28]);
        let c = LayerSpec::Conv2d { in_ch: 1, out_ch: 1, kernel: 4, stride: 2, padding: 1 };
        assert_eq!(c.output_shape(&[1, 1, 28, 28]).unwrap(), vec![1, 1, 14, 14]);
        assert_eq!(c.output_shape(&[1, 1, 14, 14]).unwrap(), vec![1, 1, 7, 7]);
    }

    #[test]
    fn shape_composition_errors_are_reported() {
        let spec = LayerSpec::Dense { fan_in: 3, fan_out: 2 };
        assert!(spec.output_shape(&[1, 4]).is_err());
        let conv = LayerSpec::Conv2d { in_ch: 1, out_ch: 1, kernel: 4, stride: 2, padding: 1 };
        assert!(conv.output_shape(&[1, 1, 1, 1]).is_err(), "kernel larger than padded input");
    }
}
