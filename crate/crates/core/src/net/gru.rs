//! GRU cell: forward step and its exact backward step.
//!
//! ```text
//! z = σ(W_z x + U_z h_prev + b_z)
//! r = σ(W_r x + U_r h_prev + b_r)
//! h̃ = tanh(W_h x + U_h (r ⊙ h_prev) + b_h)
//! h = (1 − z) ⊙ h_prev + z ⊙ h̃
//! ```

use serde::{Deserialize, Serialize};

use super::tensor::{sigmoid, Matrix};
use super::NetError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruCellParams {
    pub w_z: Matrix,
    pub w_r: Matrix,
    pub w_h: Matrix,
    pub u_z: Matrix,
    pub u_r: Matrix,
    pub u_h: Matrix,
    pub b_z: Vec<f64>,
    pub b_r: Vec<f64>,
    pub b_h: Vec<f64>,
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GruStep {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub h_tilde: Vec<f64>,
    pub h: Vec<f64>,
}

impl GruCellParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Matrix::zeros(hidden_dim, input_dim);
        let u = || Matrix::zeros(hidden_dim, hidden_dim);
        GruCellParams {
            w_z: w(),
            w_r: w(),
            w_h: w(),
            u_z: u(),
            u_r: u(),
            u_h: u(),
            b_z: vec![0.0; hidden_dim],
            b_r: vec![0.0; hidden_dim],
            b_h: vec![0.0; hidden_dim],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.rows()
    }

    /// Tensors in checkpoint order.
    pub fn tensors(&self) -> [(&'static str, &[f64]); 9] {
        [
            ("w_z", self.w_z.as_slice()),
            ("w_r", self.w_r.as_slice()),
            ("w_h", self.w_h.as_slice()),
            ("u_z", self.u_z.as_slice()),
            ("u_r", self.u_r.as_slice()),
            ("u_h", self.u_h.as_slice()),
            ("b_z", &self.b_z),
            ("b_r", &self.b_r),
            ("b_h", &self.b_h),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 9] {
        [
            self.w_z.as_mut_slice(),
            self.w_r.as_mut_slice(),
            self.w_h.as_mut_slice(),
            self.u_z.as_mut_slice(),
            self.u_r.as_mut_slice(),
            self.u_h.as_mut_slice(),
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }

    pub(crate) fn step(&self, x: &[f64], h_prev: &[f64]) -> GruStep {
        let gate = |w: &Matrix, u: &Matrix, b: &[f64], hidden: &[f64]| {
            let mut a = b.to_vec();
            w.mul_vec_add(x, &mut a);
            u.mul_vec_add(hidden, &mut a);
            a
        };
        let z: Vec<f64> = gate(&self.w_z, &self.u_z, &self.b_z, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let r: Vec<f64> = gate(&self.w_r, &self.u_r, &self.b_r, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let reset: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
        let h_tilde: Vec<f64> = gate(&self.w_h, &self.u_h, &self.b_h, &reset)
            .into_iter()
            .map(f64::tanh)
            .collect();
        let h = (0..h_prev.len())
            .map(|k| (1.0 - z[k]) * h_prev[k] + z[k] * h_tilde[k])
            .collect();
        GruStep { z, r, h_tilde, h }
    }

    /// Accumulates parameter gradients into `grads` and input/state
    /// gradients into `dx` and `dh_prev`, given `dh = ∂L/∂h`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn step_backward(
        &self,
        grads: &mut GruCellParams,
        x: &[f64],
        h_prev: &[f64],
        step: &GruStep,
        dh: &[f64],
        dx: Option<&mut [f64]>,
        dh_prev: &mut [f64],
    ) {
        let hidden = h_prev.len();
        let mut da_z = vec![0.0; hidden];
        let mut da_r = vec![0.0; hidden];
        let mut da_h = vec![0.0; hidden];
        for k in 0..hidden {
            let (z, ht) = (step.z[k], step.h_tilde[k]);
            dh_prev[k] += dh[k] * (1.0 - z);
            da_z[k] = dh[k] * (ht - h_prev[k]) * z * (1.0 - z);
            da_h[k] = dh[k] * z * (1.0 - ht * ht);
        }

        let reset: Vec<f64> = step.r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
        let mut d_reset = vec![0.0; hidden];
        self.u_h.tr_mul_vec_add(&da_h, &mut d_reset);
        for k in 0..hidden {
            let r = step.r[k];
            dh_prev[k] += d_reset[k] * r;
            da_r[k] = d_reset[k] * h_prev[k] * r * (1.0 - r);
        }

        grads.w_z.add_outer(1.0, &da_z, x);
        grads.w_r.add_outer(1.0, &da_r, x);
        grads.w_h.add_outer(1.0, &da_h, x);
        grads.u_z.add_outer(1.0, &da_z, h_prev);
        grads.u_r.add_outer(1.0, &da_r, h_prev);
        grads.u_h.add_outer(1.0, &da_h, &reset);
        for k in 0..hidden {
            grads.b_z[k] += da_z[k];
            grads.b_r[k] += da_r[k];
            grads.b_h[k] += da_h[k];
        }

        self.u_z.tr_mul_vec_add(&da_z, dh_prev);
        self.u_r.tr_mul_vec_add(&da_r, dh_prev);
        if let Some(dx) = dx {
            self.w_z.tr_mul_vec_add(&da_z, dx);
            self.w_r.tr_mul_vec_add(&da_r, dx);
            self.w_h.tr_mul_vec_add(&da_h, dx);
        }
    }
}

/// One GRU step with shape checking.
pub fn gru_cell(params: &GruCellParams, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>, NetError> {
    NetError::check_len("gru input", params.input_dim(), x.len())?;
    NetError::check_len("gru hidden state", params.hidden_dim(), h_prev.len())?;
    Ok(params.step(x, h_prev).h)
}
