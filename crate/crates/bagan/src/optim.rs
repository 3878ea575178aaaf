//! Adam optimizer with bias correction, one state per trained network.

use crate::error::{Error, Result};
use crate::network::NetworkParams;
use crate::tensor::Scalar;

/// Per-parameter first/second moments plus the shared step counter and
/// hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState<S: Scalar = f32> {
    m: NetworkParams<S>,
    v: NetworkParams<S>,
    step: u64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<S: Scalar> AdamState<S> {
    /// Fresh state (zero moments) shaped like `params`.
    pub fn new(params: &NetworkParams<S>, alpha: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let mut m = params.clone();
        for t in m.tensors_mut() {
            t.scale(S::zero());
        }
        let v = m.clone();
        AdamState { m, v, step: 0, alpha, beta1, beta2, eps }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update: `θ ← θ − α·m̂/(√v̂ + ε)` with bias-corrected moments.
/// Gradients must be shaped like the parameters (same signature).
pub fn adam_step<S: Scalar>(
    params: &mut NetworkParams<S>,
    grads: &NetworkParams<S>,
    state: &mut AdamState<S>,
) -> Result<()> {
    if params.signature() != grads.signature() {
        return Err(Error::ShapeMismatch(format!(
            "adam_step gradients {} do not match params {}",
            grads.signature(),
            params.signature()
        )));
    }
    state.step += 1;
    let b1 = S::from_f64c(state.beta1);
    let b2 = S::from_f64c(state.beta2);
    let one = S::one();
    // Fold bias correction into the step size, in f64 for exact exponents.
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);
    let alpha_t = S::from_f64c(state.alpha * bc2.sqrt() / bc1);
    let eps_t = S::from_f64c(state.eps * bc2.sqrt());
    for (((p, g), m), v) in params
        .tensors_mut()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut())
        .zip(state.v.tensors_mut())
    {
        for (((pv, gv), mv), vv) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mv = b1 * *mv + (one - b1) * *gv;
            *vv = b2 * *vv + (one - b2) * *gv * *gv;
            let upd = alpha_t * *mv / (vv.sqrt() + eps_t);
            if !upd.is_finite() {
                return Err(Error::NonFinite("adam update".to_string()));
            }
            *pv -= upd;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::LayerSpec;
    use crate::network::Network;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_param_net(value: f64) -> Network<f64> {
        let specs = vec![LayerSpec::Dense { fan_in: 1, fan_out: 1 }];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net: Network<f64> = Network::init(specs, &mut rng);
        net.params_mut().layers_mut()[0].as_mut().unwrap().weight.data_mut()[0] = value;
        net
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut net = one_param_net(0.7);
        let before = net.params().clone();
        let grads = {
            let mut g = before.clone();
            for t in g.tensors_mut() {
                t.scale(0.0);
            }
            g
        };
        let mut st = AdamState::new(net.params(), 0.1, 0.9, 0.999, 1e-8);
        adam_step(net.params_mut(), &grads, &mut st).unwrap();
        assert_eq!(net.params(), &before);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn single_step_with_unit_gradient_moves_by_alpha() {
        // Bias correction makes m̂ = v̂ = 1 after one step with g = 1, so the
        // update is α·1/(√1 + ε') ≈ α.
        let mut net = one_param_net(0.5);
        let mut grads = net.params().clone();
        for t in grads.tensors_mut() {
            t.scale(0.0);
        }
        grads.layers_mut()[0].as_mut().unwrap().weight.data_mut()[0] = 1.0;
        let mut st = AdamState::new(net.params(), 0.1, 0.9, 0.999, 1e-8);
        adam_step(net.params_mut(), &grads, &mut st).unwrap();
        let w = net.params().layers()[0].as_ref().unwrap().weight.data()[0];
        assert!((w - (0.5 - 0.1)).abs() < 1e-8, "w = {w}");
    }

    #[test]
    fn identical_runs_produce_bitwise_identical_trajectories() {
        let run = || {
            let mut net = one_param_net(0.3);
            let mut st = AdamState::new(net.params(), 0.05, 0.5, 0.999, 1e-8);
            for k in 0..25 {
                let mut grads = net.params().clone();
                let w = grads.layers()[0].as_ref().unwrap().weight.data()[0];
                grads.layers_mut()[0].as_mut().unwrap().weight.data_mut()[0] =
                    (w * 3.0).sin() + 0.1 * k as f64;
                adam_step(net.params_mut(), &grads, &mut st).unwrap();
            }
            net.params().layers()[0].as_ref().unwrap().weight.data()[0]
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut net = one_param_net(0.1);
        let mut grads = net.params().clone();
        grads.layers_mut()[0].as_mut().unwrap().weight.data_mut()[0] = f64::NAN;
        let mut st = AdamState::new(net.params(), 0.1, 0.9, 0.999, 1e-8);
        assert!(adam_step(net.params_mut(), &grads, &mut st).is_err());
    }
}
