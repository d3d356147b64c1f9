//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::nn::params::{Gradients, HyperParams, ModelParams};

/// First/second moment accumulators, one pair per parameter block, in the
/// same `w1, b1, w2, b2` order as [`ModelParams::blocks`].
///
/// A fresh state has `t = 0` and all moments zero; `t` advances by exactly
/// one per [`adam_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: [Vec<f32>; 4],
    v: [Vec<f32>; 4],
    t: u64,
}

impl AdamState {
    /// Zeroed moments shaped like `params`.
    pub fn new(params: &ModelParams) -> Self {
        let shape = params.blocks().map(|b| vec![0.0f32; b.len()]);
        Self {
            m: shape.clone(),
            v: shape,
            t: 0,
        }
    }

    /// Number of optimizer steps taken with this state.
    pub fn t(&self) -> u64 {
        self.t
    }
}

/// One Adam update:
///
/// ```text
/// t' = t + 1
/// m' = b1*m + (1-b1)*g        mhat = m' / (1 - b1^t')
/// v' = b2*v + (1-b2)*g^2      vhat = v' / (1 - b2^t')
/// p' = p - lr * mhat / (sqrt(vhat) + eps)
/// ```
///
/// applied elementwise over every parameter array. With `learning_rate = 0`
/// the returned params are bit-identical to the input.
pub fn adam_step(
    mut params: ModelParams,
    grads: &Gradients,
    mut state: AdamState,
    hyper: &HyperParams,
) -> Result<(ModelParams, AdamState)> {
    hyper.validate()?;
    let pblocks = params.blocks();
    let gblocks = grads.blocks();
    for i in 0..4 {
        if pblocks[i].len() != gblocks[i].len() || pblocks[i].len() != state.m[i].len() {
            return Err(Error::ShapeMismatch(format!(
                "params/grads/state block {i} lengths differ: {} / {} / {}",
                pblocks[i].len(),
                gblocks[i].len(),
                state.m[i].len()
            )));
        }
    }
    if !grads.all_finite() {
        return Err(Error::InvalidValue("non-finite gradient".into()));
    }

    state.t += 1;
    let t = state.t;
    let bc1 = 1.0 - hyper.beta1.powi(t as i32);
    let bc2 = 1.0 - hyper.beta2.powi(t as i32);
    let lr = hyper.learning_rate;

    let gblocks = grads.blocks();
    for (i, pblock) in params.blocks_mut().into_iter().enumerate() {
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        let g = gblocks[i];
        for j in 0..pblock.len() {
            m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g[j];
            v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g[j] * g[j];
            let mhat = m[j] / bc1;
            let vhat = v[j] / bc2;
            let update = lr * mhat / (vhat.sqrt() + hyper.epsilon);
            // Skipping exact-zero updates keeps the lr=0 case (and zero
            // gradients on zero state) a bit-exact no-op even for -0.0
            // parameters.
            if update != 0.0 {
                pblock[j] -= update;
            }
        }
    }

    if !params.all_finite() {
        return Err(Error::InvalidValue("non-finite parameter after step".into()));
    }
    Ok((params, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::matrix::Matrix;
    use crate::nn::params::{init_params, Dims};

    fn one_param_net(w: f32) -> ModelParams {
        ModelParams::from_tensors(vec![w], vec![0.0], vec![0.0], vec![0.0]).unwrap()
    }

    fn grad_on_w1(params: &ModelParams, g: f32) -> Gradients {
        let mut grads = Gradients::zeros_like(params);
        grads.dw1 = Matrix::from_vec(1, 1, vec![g]);
        grads
    }

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let params = init_params(3, Dims::new(4, 3, 2)).unwrap();
        let grads = Gradients::zeros_like(&params);
        let state = AdamState::new(&params);
        let (next, state) = adam_step(params.clone(), &grads, state, &HyperParams::default())
            .unwrap();
        assert!(next.bitwise_eq(&params));
        assert_eq!(state.t(), 1);
        // Moments stay exactly zero, so further zero-grad steps are no-ops too.
        let (next2, state) = adam_step(next.clone(), &grads, state, &HyperParams::default())
            .unwrap();
        assert!(next2.bitwise_eq(&params));
        assert_eq!(state.t(), 2);
    }

    #[test]
    fn zero_learning_rate_is_bit_exact_noop() {
        let params = init_params(8, Dims::new(5, 4, 3)).unwrap();
        let mut grads = Gradients::zeros_like(&params);
        for block in grads.blocks_mut() {
            for (j, g) in block.iter_mut().enumerate() {
                *g = (j as f32 + 1.0) * 0.01 * if j % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
        let hyper = HyperParams {
            learning_rate: 0.0,
            ..Default::default()
        };
        let state = AdamState::new(&params);
        let (next, state) = adam_step(params.clone(), &grads, state, &hyper).unwrap();
        assert!(next.bitwise_eq(&params));
        assert_eq!(state.t(), 1);
    }

    #[test]
    fn first_step_moves_by_roughly_lr() {
        // Bias correction cancels at t=1: mhat = g, vhat = g^2, so the update
        // is lr * g / (|g| + eps), essentially lr in magnitude.
        let params = one_param_net(0.25);
        let grads = grad_on_w1(&params, 0.5);
        let state = AdamState::new(&params);
        let (next, state) = adam_step(params, &grads, state, &HyperParams::default()).unwrap();
        let delta = next.w1().get(0, 0) - 0.25;
        assert!((delta + 0.001).abs() < 1e-6, "delta {delta}");
        assert_eq!(state.t(), 1);
    }

    #[test]
    fn three_steps_match_independent_trace() {
        // Minimize L(p) = p^2 from p=1; gradient is 2p. The reference trace
        // recomputes the Adam recurrences from scratch in f64.
        let hyper = HyperParams {
            learning_rate: 0.1,
            ..Default::default()
        };
        let mut params = one_param_net(1.0);
        let mut state = AdamState::new(&params);

        let (mut rm, mut rv, mut rp) = (0.0f64, 0.0f64, 1.0f64);
        for t in 1..=3 {
            let g = 2.0 * f64::from(params.w1().get(0, 0));
            let grads = grad_on_w1(&params, g as f32);
            let (next, next_state) = adam_step(params, &grads, state, &hyper).unwrap();
            params = next;
            state = next_state;

            rm = 0.9 * rm + 0.1 * g;
            rv = 0.999 * rv + 0.001 * g * g;
            let mhat = rm / (1.0 - 0.9f64.powi(t));
            let vhat = rv / (1.0 - 0.999f64.powi(t));
            rp -= 0.1 * mhat / (vhat.sqrt() + 1e-8);

            let got = f64::from(params.w1().get(0, 0));
            assert!(
                (got - rp).abs() < 1e-6 * rp.abs().max(1.0),
                "step {t}: {got} vs {rp}"
            );
        }
        assert_eq!(state.t(), 3);
    }

    #[test]
    fn moments_decay_after_a_nonzero_step() {
        let params = one_param_net(0.0);
        let state = AdamState::new(&params);
        let hyper = HyperParams::default();
        let (params, state) = adam_step(params, &grad_on_w1(&one_param_net(0.0), 1.0), state, &hyper)
            .unwrap();
        let m1 = state.m[0][0];
        let v1 = state.v[0][0];
        // f32 arithmetic: (1 - 0.999f32) is ~1.3e-8 away from 1e-3.
        assert!((m1 - 0.1).abs() < 1e-7);
        assert!((v1 - 0.001).abs() < 1e-7);
        // A zero-gradient step decays both moments by their betas.
        let (_, state) = adam_step(
            params.clone(),
            &Gradients::zeros_like(&params),
            state,
            &hyper,
        )
        .unwrap();
        assert!((state.m[0][0] - 0.9 * m1).abs() < 1e-8);
        assert!((state.v[0][0] - 0.999 * v1).abs() < 1e-9);
        assert!(state.v.iter().all(|b| b.iter().all(|&v| v >= 0.0)));
    }

    #[test]
    fn rejects_non_finite_gradients_and_shape_mismatch() {
        let params = init_params(2, Dims::new(3, 2, 2)).unwrap();
        let mut grads = Gradients::zeros_like(&params);
        grads.db2[0] = f32::NAN;
        let r = adam_step(
            params.clone(),
            &grads,
            AdamState::new(&params),
            &HyperParams::default(),
        );
        assert!(matches!(r, Err(Error::InvalidValue(_))));

        let other = init_params(2, Dims::new(3, 5, 2)).unwrap();
        let r = adam_step(
            params.clone(),
            &Gradients::zeros_like(&other),
            AdamState::new(&params),
            &HyperParams::default(),
        );
        assert!(matches!(r, Err(Error::ShapeMismatch(_))));
    }
}
