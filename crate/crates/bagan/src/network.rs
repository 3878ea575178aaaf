//! Feed-forward network: an ordered `LayerSpec` list plus matching
//! parameters, with recorded forward passes and exact backpropagation.
//!
//! Losses that fuse with the final activation (softmax or sigmoid
//! cross-entropy) inject their gradient at the pre-activation logits via
//! [`Network::backward_fused`].

use crate::error::{Error, Result};
use crate::layers::{Activation, LayerSpec, ParamPair};
use crate::tensor::{Scalar, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Ordered per-layer parameters plus a shape signature. Two networks are
/// weight-transfer compatible exactly when their signatures are equal.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<S: Scalar = f32> {
    layers: Vec<Option<ParamPair<S>>>,
    signature: String,
}

impl<S: Scalar> NetworkParams<S> {
    /// Zero-valued parameters shaped for the given layer stack.
    pub fn zeros(specs: &[LayerSpec]) -> Self {
        let layers = specs
            .iter()
            .map(|spec| {
                spec.param_shapes().map(|(w, b)| ParamPair {
                    weight: Tensor::zeros(&w),
                    bias: Tensor::zeros(&b),
                })
            })
            .collect();
        NetworkParams { layers, signature: signature_of(specs) }
    }

    pub fn signature(&self) -> &str {
        &self.signature
    }

    pub fn layers(&self) -> &[Option<ParamPair<S>>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Option<ParamPair<S>>] {
        &mut self.layers
    }

    /// Copies all weights from `other`; signatures must match.
    pub fn copy_from(&mut self, other: &NetworkParams<S>) -> Result<()> {
        if self.signature != other.signature {
            return Err(Error::ShapeMismatch(format!(
                "weight transfer between incompatible signatures: {} vs {}",
                self.signature, other.signature
            )));
        }
        self.layers.clone_from(&other.layers);
        Ok(())
    }

    /// Iterates mutable references to every parameter tensor (weights and
    /// biases, in layer order).
    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<S>> {
        self.layers
            .iter_mut()
            .flatten()
            .flat_map(|pp| [&mut pp.weight, &mut pp.bias])
    }

    /// Iterates every parameter tensor in layer order.
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor<S>> {
        self.layers.iter().flatten().flat_map(|pp| [&pp.weight, &pp.bias])
    }

    /// Total scalar parameter count.
    pub fn numel(&self) -> usize {
        self.tensors().map(Tensor::numel).sum()
    }
}

fn signature_of(specs: &[LayerSpec]) -> String {
    let parts: Vec<String> = specs
        .iter()
        .map(|s| match s.param_shapes() {
            Some((w, b)) => format!("{w:?}/{b:?}"),
            None => "-".to_string(),
        })
        .collect();
    parts.join(";")
}

/// Activation record from a recorded forward pass: `acts[0]` is the input,
/// `acts[i+1]` the output of layer `i`.
pub struct Tape<S: Scalar = f32> {
    acts: Vec<Tensor<S>>,
}

impl<S: Scalar> Tape<S> {
    /// Network output of the recorded pass.
    pub fn output(&self) -> &Tensor<S> {
        self.acts.last().expect("tape holds at least the input")
    }
}

/// Layer stack plus parameters.
#[derive(Debug, Clone)]
pub struct Network<S: Scalar = f32> {
    specs: Vec<LayerSpec>,
    params: NetworkParams<S>,
}

impl<S: Scalar> Network<S> {
    /// Builds a network with Xavier-uniform weights (±√(6/(fan_in+fan_out)))
    /// and zero biases, drawing from `rng` in layer order.
    pub fn init(specs: Vec<LayerSpec>, rng: &mut ChaCha8Rng) -> Self {
        let mut params = NetworkParams::zeros(&specs);
        for (spec, slot) in specs.iter().zip(params.layers.iter_mut()) {
            if let (Some(bound), Some(pp)) = (spec.init_bound(), slot.as_mut()) {
                for v in pp.weight.data_mut() {
                    *v = S::from_f64c((rng.random::<f64>() * 2.0 - 1.0) * bound);
                }
            }
        }
        Network { specs, params }
    }

    /// Wraps existing parameters; signature must match the specs.
    pub fn from_params(specs: Vec<LayerSpec>, params: NetworkParams<S>) -> Result<Self> {
        if params.signature != signature_of(&specs) {
            return Err(Error::ShapeMismatch(format!(
                "params signature {} does not match specs {}",
                params.signature,
                signature_of(&specs)
            )));
        }
        Ok(Network { specs, params })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn params(&self) -> &NetworkParams<S> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut NetworkParams<S> {
        &mut self.params
    }

    /// Forward pass without recording.
    pub fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let mut cur = x.clone();
        for (i, spec) in self.specs.iter().enumerate() {
            cur = spec.forward(self.params.layers[i].as_ref(), &cur)?;
            cur.check_finite(&format!("layer {i} output"))?;
        }
        Ok(cur)
    }

    /// Forward pass recording every intermediate activation for backprop.
    pub fn forward_recorded(&self, x: &Tensor<S>) -> Result<Tape<S>> {
        let mut acts = Vec::with_capacity(self.specs.len() + 1);
        acts.push(x.clone());
        for (i, spec) in self.specs.iter().enumerate() {
            let y = spec.forward(self.params.layers[i].as_ref(), acts.last().unwrap())?;
            y.check_finite(&format!("layer {i} output"))?;
            acts.push(y);
        }
        Ok(Tape { acts })
    }

    /// Backpropagates `dy` (gradient w.r.t. the network output) through the
    /// whole stack. Returns parameter gradients and the input gradient.
    pub fn backward(&self, tape: &Tape<S>, dy: &Tensor<S>) -> Result<(NetworkParams<S>, Tensor<S>)> {
        self.backward_from(tape, dy, self.specs.len())
    }

    /// Backpropagates a gradient injected at the *pre-activation logits* of
    /// the final layer, which must be a softmax or sigmoid activation. Used
    /// with the fused cross-entropy losses whose gradient is `p − target`.
    pub fn backward_fused(
        &self,
        tape: &Tape<S>,
        dlogits: &Tensor<S>,
    ) -> Result<(NetworkParams<S>, Tensor<S>)> {
        match self.specs.last() {
            Some(LayerSpec::Activation(Activation::Softmax))
            | Some(LayerSpec::Activation(Activation::Sigmoid)) => {}
            other => {
                return Err(Error::InvalidArgument(format!(
                    "backward_fused requires a softmax/sigmoid final layer, found {other:?}"
                )))
            }
        }
        self.backward_from(tape, dlogits, self.specs.len() - 1)
    }

    fn backward_from(
        &self,
        tape: &Tape<S>,
        dy: &Tensor<S>,
        from_layer: usize,
    ) -> Result<(NetworkParams<S>, Tensor<S>)> {
        if tape.acts.len() != self.specs.len() + 1 {
            return Err(Error::InvalidArgument(
                "tape does not belong to this network".to_string(),
            ));
        }
        let mut grads = NetworkParams::zeros(&self.specs);
        let mut cur = dy.clone();
        for i in (0..from_layer).rev() {
            let (pg, dx) = self.specs[i].backward(
                self.params.layers[i].as_ref(),
                &tape.acts[i],
                &tape.acts[i + 1],
                &cur,
            )?;
            grads.layers[i] = pg;
            cur = dx;
        }
        cur.check_finite("input gradient")?;
        Ok((grads, cur))
    }
}

/// Largest relative error between analytic parameter gradients and central
/// finite differences under a fixed linear probe loss `L = Σ w ⊙ out`.
///
/// Verification utility backing the gradient-correctness acceptance check.
/// `h` is the probe step; relative error uses `|a−n| / max(|a|, |n|, floor)`.
pub fn gradcheck_max_rel_err<S: Scalar>(
    net: &mut Network<S>,
    x: &Tensor<S>,
    probe: &Tensor<S>,
    h: f64,
    floor: f64,
) -> Result<f64> {
    let tape = net.forward_recorded(x)?;
    let (grads, _) = net.backward(&tape, probe)?;
    let loss = |net: &Network<S>| -> Result<f64> {
        let out = net.forward(x)?;
        Ok(out
            .data()
            .iter()
            .zip(probe.data())
            .map(|(o, w)| o.to_f64c() * w.to_f64c())
            .sum())
    };
    let mut worst = 0.0f64;
    let n_layers = net.specs.len();
    for li in 0..n_layers {
        if grads.layers[li].is_none() {
            continue;
        }
        for ti in 0..2 {
            let n_el = {
                let pp = net.params.layers[li].as_ref().unwrap();
                if ti == 0 { pp.weight.numel() } else { pp.bias.numel() }
            };
            for ei in 0..n_el {
                let orig = {
                    let pp = net.params.layers[li].as_ref().unwrap();
                    let t = if ti == 0 { &pp.weight } else { &pp.bias };
                    t.data()[ei].to_f64c()
                };
                let step = h * orig.abs().max(1.0);
                let mut eval_at = |v: f64| -> Result<f64> {
                    let pp = net.params.layers[li].as_mut().unwrap();
                    let t = if ti == 0 { &mut pp.weight } else { &mut pp.bias };
                    t.data_mut()[ei] = S::from_f64c(v);
                    loss(net)
                };
                let lp = eval_at(orig + step)?;
                let lm = eval_at(orig - step)?;
                eval_at(orig)?;
                let numeric = (lp - lm) / (2.0 * step);
                let analytic = {
                    let pp = grads.layers[li].as_ref().unwrap();
                    let t = if ti == 0 { &pp.weight } else { &pp.bias };
                    t.data()[ei].to_f64c()
                };
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
                if rel > worst {
                    worst = rel;
                }
            }
        }
    }
    Ok(worst)
}
