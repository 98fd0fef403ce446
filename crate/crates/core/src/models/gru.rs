//! Gated recurrent unit without bias terms:
//!
//! ```text
//! z = sigmoid(W_z x + U_z h)
//! r = sigmoid(W_r x + U_r h)
//! h~ = tanh(W x + U (r * h))
//! h' = (1 - z) * h + z * h~
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub w_z: Matrix,
    pub u_z: Matrix,
    pub w_r: Matrix,
    pub u_r: Matrix,
    pub w: Matrix,
    pub u: Matrix,
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self::filled(input, hidden, 0.0)
    }

    pub fn filled(input: usize, hidden: usize, value: f64) -> Self {
        let wx = || Matrix::filled(hidden, input, value);
        let wh = || Matrix::filled(hidden, hidden, value);
        GruParams {
            w_z: wx(),
            u_z: wh(),
            w_r: wx(),
            u_r: wh(),
            w: wx(),
            u: wh(),
        }
    }

    pub fn uniform<R: Rng>(input: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        let mut m = |rows, cols| Matrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..=scale));
        GruParams {
            w_z: m(hidden, input),
            u_z: m(hidden, hidden),
            w_r: m(hidden, input),
            u_r: m(hidden, hidden),
            w: m(hidden, input),
            u: m(hidden, hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.rows
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols
    }

    pub fn tensors(&self) -> [&Matrix; 6] {
        [&self.w_z, &self.u_z, &self.w_r, &self.u_r, &self.w, &self.u]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix; 6] {
        [
            &mut self.w_z,
            &mut self.u_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.w,
            &mut self.u,
        ]
    }
}

#[inline]
pub(crate) fn sigmoid(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

/// Intermediate values of one step, kept for backpropagation.
#[derive(Clone, Debug)]
pub(crate) struct GruCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub h_tilde: Vec<f64>,
    pub rh: Vec<f64>,
}

/// One GRU step.
pub fn gru_step(x: &[f64], h_prev: &[f64], params: &GruParams) -> Result<Vec<f64>> {
    if x.len() != params.input_dim() || h_prev.len() != params.hidden() {
        return Err(Error::Input(format!(
            "gru expects input {} and hidden {}, got {} and {}",
            params.input_dim(),
            params.hidden(),
            x.len(),
            h_prev.len()
        )));
    }
    Ok(forward(x, h_prev, params).0)
}

/// Gate activations `(z, r, h~)` of one step, for inspection.
pub fn gru_gates(x: &[f64], h_prev: &[f64], params: &GruParams) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (_, c) = forward(x, h_prev, params);
    (c.z, c.r, c.h_tilde)
}

pub(crate) fn forward(x: &[f64], h_prev: &[f64], p: &GruParams) -> (Vec<f64>, GruCache) {
    let hidden = p.hidden();
    let mut z = vec![0.0; hidden];
    p.w_z.gemv_acc(x, &mut z);
    p.u_z.gemv_acc(h_prev, &mut z);
    z.iter_mut().for_each(|v| *v = sigmoid(*v));

    let mut r = vec![0.0; hidden];
    p.w_r.gemv_acc(x, &mut r);
    p.u_r.gemv_acc(h_prev, &mut r);
    r.iter_mut().for_each(|v| *v = sigmoid(*v));

    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let mut h_tilde = vec![0.0; hidden];
    p.w.gemv_acc(x, &mut h_tilde);
    p.u.gemv_acc(&rh, &mut h_tilde);
    h_tilde.iter_mut().for_each(|v| *v = v.tanh());

    let h: Vec<f64> = (0..hidden)
        .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * h_tilde[i])
        .collect();
    (
        h,
        GruCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            z,
            r,
            h_tilde,
            rh,
        },
    )
}

/// Accumulate parameter gradients for one step given `dh = dL/dh'`.
/// Returns `(dL/dx, dL/dh)`.
pub(crate) fn backward(
    p: &GruParams,
    c: &GruCache,
    dh: &[f64],
    grads: &mut GruParams,
) -> (Vec<f64>, Vec<f64>) {
    let hidden = p.hidden();
    let mut dx = vec![0.0; p.input_dim()];
    let mut dh_prev: Vec<f64> = (0..hidden).map(|i| dh[i] * (1.0 - c.z[i])).collect();

    let da_h: Vec<f64> = (0..hidden)
        .map(|i| dh[i] * c.z[i] * (1.0 - c.h_tilde[i] * c.h_tilde[i]))
        .collect();
    let da_z: Vec<f64> = (0..hidden)
        .map(|i| dh[i] * (c.h_tilde[i] - c.h_prev[i]) * c.z[i] * (1.0 - c.z[i]))
        .collect();

    grads.w.outer_acc(&da_h, &c.x);
    grads.u.outer_acc(&da_h, &c.rh);
    p.w.gemv_t_acc(&da_h, &mut dx);
    let mut d_rh = vec![0.0; hidden];
    p.u.gemv_t_acc(&da_h, &mut d_rh);

    let da_r: Vec<f64> = (0..hidden)
        .map(|i| d_rh[i] * c.h_prev[i] * c.r[i] * (1.0 - c.r[i]))
        .collect();
    for i in 0..hidden {
        dh_prev[i] += d_rh[i] * c.r[i];
    }

    grads.w_z.outer_acc(&da_z, &c.x);
    grads.u_z.outer_acc(&da_z, &c.h_prev);
    p.w_z.gemv_t_acc(&da_z, &mut dx);
    p.u_z.gemv_t_acc(&da_z, &mut dh_prev);

    grads.w_r.outer_acc(&da_r, &c.x);
    grads.u_r.outer_acc(&da_r, &c.h_prev);
    p.w_r.gemv_t_acc(&da_r, &mut dx);
    p.u_r.gemv_t_acc(&da_r, &mut dh_prev);

    (dx, dh_prev)
}
