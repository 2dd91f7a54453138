//! LSTM cell: gated forward step and the exact backward pass through it.
//!
//! Gate layout follows the usual four-gate form: input `i`, forget `f`,
//! output `o` and candidate `g`, with
//! `c_t = f ⊙ c_{t-1} + i ⊙ g` and `h_t = o ⊙ tanh(c_t)`.

use rand::Rng;

use super::matrix::{vec_add, Matrix};
use crate::error::{Error, Result};

/// Weights of one LSTM cell. Input-to-hidden matrices are `hidden x input`,
/// hidden-to-hidden are `hidden x hidden`, biases are `hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_ix: Matrix,
    pub w_ih: Matrix,
    pub b_i: Vec<f64>,
    pub w_fx: Matrix,
    pub w_fh: Matrix,
    pub b_f: Vec<f64>,
    pub w_ox: Matrix,
    pub w_oh: Matrix,
    pub b_o: Vec<f64>,
    pub w_gx: Matrix,
    pub w_gh: Matrix,
    pub b_g: Vec<f64>,
}

/// Hidden and cell state carried between time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Intermediates of one forward step, consumed by [`lstm_cell_backward`].
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
}

/// Gradients with the same layout as [`LstmParams`].
pub type LstmGrads = LstmParams;

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let wx = || Matrix::zeros(hidden, input);
        let wh = || Matrix::zeros(hidden, hidden);
        LstmParams {
            w_ix: wx(),
            w_ih: wh(),
            b_i: vec![0.0; hidden],
            w_fx: wx(),
            w_fh: wh(),
            b_f: vec![0.0; hidden],
            w_ox: wx(),
            w_oh: wh(),
            b_o: vec![0.0; hidden],
            w_gx: wx(),
            w_gh: wh(),
            b_g: vec![0.0; hidden],
        }
    }

    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut wx = || Matrix::init_uniform(hidden, input, input, rng);
        let w_ix = wx();
        let w_fx = wx();
        let w_ox = wx();
        let w_gx = wx();
        let mut wh = || Matrix::init_uniform(hidden, hidden, hidden, rng);
        let w_ih = wh();
        let w_fh = wh();
        let w_oh = wh();
        let w_gh = wh();
        LstmParams {
            w_ix,
            w_ih,
            b_i: vec![0.0; hidden],
            w_fx,
            w_fh,
            b_f: vec![0.0; hidden],
            w_ox,
            w_oh,
            b_o: vec![0.0; hidden],
            w_gx,
            w_gh,
            b_g: vec![0.0; hidden],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_ix.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_ix.rows()
    }

    fn check_shapes(&self) -> Result<()> {
        let (d, n) = self.w_ix.shape();
        let gates = [
            (&self.w_ix, &self.w_ih, &self.b_i),
            (&self.w_fx, &self.w_fh, &self.b_f),
            (&self.w_ox, &self.w_oh, &self.b_o),
            (&self.w_gx, &self.w_gh, &self.b_g),
        ];
        for (wx, wh, b) in gates {
            if wx.shape() != (d, n) || wh.shape() != (d, d) || b.len() != d {
                return Err(Error::shape(format!(
                    "inconsistent gate shapes: expected x-weights {d}x{n}, h-weights {d}x{d}, bias {d}"
                )));
            }
        }
        Ok(())
    }

    /// Visit every tensor as `(suffix, data, (rows, cols))` in a fixed order.
    /// Bias vectors report shape `(1, len)`.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64], (usize, usize))> {
        let d = self.hidden_dim();
        vec![
            ("w_ix", self.w_ix.data(), self.w_ix.shape()),
            ("w_ih", self.w_ih.data(), self.w_ih.shape()),
            ("b_i", self.b_i.as_slice(), (1, d)),
            ("w_fx", self.w_fx.data(), self.w_fx.shape()),
            ("w_fh", self.w_fh.data(), self.w_fh.shape()),
            ("b_f", self.b_f.as_slice(), (1, d)),
            ("w_ox", self.w_ox.data(), self.w_ox.shape()),
            ("w_oh", self.w_oh.data(), self.w_oh.shape()),
            ("b_o", self.b_o.as_slice(), (1, d)),
            ("w_gx", self.w_gx.data(), self.w_gx.shape()),
            ("w_gh", self.w_gh.data(), self.w_gh.shape()),
            ("b_g", self.b_g.as_slice(), (1, d)),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("w_ix", self.w_ix.data_mut()),
            ("w_ih", self.w_ih.data_mut()),
            ("b_i", self.b_i.as_mut_slice()),
            ("w_fx", self.w_fx.data_mut()),
            ("w_fh", self.w_fh.data_mut()),
            ("b_f", self.b_f.as_mut_slice()),
            ("w_ox", self.w_ox.data_mut()),
            ("w_oh", self.w_oh.data_mut()),
            ("b_o", self.b_o.as_mut_slice()),
            ("w_gx", self.w_gx.data_mut()),
            ("w_gh", self.w_gh.data_mut()),
            ("b_g", self.b_g.as_mut_slice()),
        ]
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn gate_preact(wx: &Matrix, wh: &Matrix, b: &[f64], x: &[f64], h_prev: &[f64]) -> Vec<f64> {
    let mut a = wx.matvec(x);
    vec_add(&mut a, &wh.matvec(h_prev));
    vec_add(&mut a, b);
    a
}

/// One LSTM step. Returns the new state and the cache for the backward pass.
pub fn lstm_cell_forward(
    x: &[f64],
    state: &LstmState,
    p: &LstmParams,
) -> Result<(LstmState, LstmCache)> {
    p.check_shapes()?;
    let (d, n) = (p.hidden_dim(), p.input_dim());
    if x.len() != n {
        return Err(Error::shape(format!(
            "input length {} != cell input dim {n}",
            x.len()
        )));
    }
    if state.h.len() != d || state.c.len() != d {
        return Err(Error::shape(format!(
            "state dims ({}, {}) != hidden dim {d}",
            state.h.len(),
            state.c.len()
        )));
    }

    let i: Vec<f64> = gate_preact(&p.w_ix, &p.w_ih, &p.b_i, x, &state.h)
        .into_iter()
        .map(sigmoid)
        .collect();
    let f: Vec<f64> = gate_preact(&p.w_fx, &p.w_fh, &p.b_f, x, &state.h)
        .into_iter()
        .map(sigmoid)
        .collect();
    let o: Vec<f64> = gate_preact(&p.w_ox, &p.w_oh, &p.b_o, x, &state.h)
        .into_iter()
        .map(sigmoid)
        .collect();
    let g: Vec<f64> = gate_preact(&p.w_gx, &p.w_gh, &p.b_g, x, &state.h)
        .into_iter()
        .map(f64::tanh)
        .collect();

    let c: Vec<f64> = (0..d)
        .map(|k| f[k] * state.c[k] + i[k] * g[k])
        .collect();
    let h: Vec<f64> = (0..d).map(|k| o[k] * c[k].tanh()).collect();
    // h = o * tanh(c) with o in (0,1) and tanh in (-1,1): always inside
    // (-1,1) for finite parameters. Non-finite values flow through so the
    // caller can report a numeric error.
    debug_assert!(h.iter().all(|v| !v.is_finite() || v.abs() < 1.0));

    let cache = LstmCache {
        x: x.to_vec(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        i,
        f,
        o,
        g,
        c: c.clone(),
    };
    Ok((LstmState { h, c }, cache))
}

/// Output of [`lstm_cell_backward`].
#[derive(Debug)]
pub struct LstmBackward {
    pub grad_x: Vec<f64>,
    pub grad_h_prev: Vec<f64>,
    pub grad_c_prev: Vec<f64>,
    pub grad_params: LstmGrads,
}

/// Exact gradients of one forward step. `grad_h` and `grad_c` are the
/// upstream gradients on `h_t` and `c_t`; parameter gradients are
/// accumulated into a fresh [`LstmGrads`].
pub fn lstm_cell_backward(
    grad_h: &[f64],
    grad_c: &[f64],
    cache: &LstmCache,
    p: &LstmParams,
) -> Result<LstmBackward> {
    p.check_shapes()?;
    let (d, n) = (p.hidden_dim(), p.input_dim());
    if grad_h.len() != d || grad_c.len() != d {
        return Err(Error::shape(format!(
            "upstream gradient dims ({}, {}) != hidden dim {d}",
            grad_h.len(),
            grad_c.len()
        )));
    }
    if cache.x.len() != n || cache.h_prev.len() != d || cache.c.len() != d {
        return Err(Error::shape(
            "cache does not match parameter shapes".to_string(),
        ));
    }

    let mut grads = LstmGrads::zeros(n, d);
    let mut da_i = vec![0.0; d];
    let mut da_f = vec![0.0; d];
    let mut da_o = vec![0.0; d];
    let mut da_g = vec![0.0; d];
    let mut grad_c_prev = vec![0.0; d];

    for k in 0..d {
        let tanh_c = cache.c[k].tanh();
        let d_o = grad_h[k] * tanh_c;
        let d_c = grad_c[k] + grad_h[k] * cache.o[k] * (1.0 - tanh_c * tanh_c);
        let d_f = d_c * cache.c_prev[k];
        let d_i = d_c * cache.g[k];
        let d_g = d_c * cache.i[k];
        grad_c_prev[k] = d_c * cache.f[k];

        da_i[k] = d_i * cache.i[k] * (1.0 - cache.i[k]);
        da_f[k] = d_f * cache.f[k] * (1.0 - cache.f[k]);
        da_o[k] = d_o * cache.o[k] * (1.0 - cache.o[k]);
        da_g[k] = d_g * (1.0 - cache.g[k] * cache.g[k]);
    }

    let mut grad_x = vec![0.0; n];
    let mut grad_h_prev = vec![0.0; d];
    let gate_parts: [(&[f64], &Matrix, &Matrix, &mut Matrix, &mut Matrix, &mut Vec<f64>); 4] = [
        (&da_i, &p.w_ix, &p.w_ih, &mut grads.w_ix, &mut grads.w_ih, &mut grads.b_i),
        (&da_f, &p.w_fx, &p.w_fh, &mut grads.w_fx, &mut grads.w_fh, &mut grads.b_f),
        (&da_o, &p.w_ox, &p.w_oh, &mut grads.w_ox, &mut grads.w_oh, &mut grads.b_o),
        (&da_g, &p.w_gx, &p.w_gh, &mut grads.w_gx, &mut grads.w_gh, &mut grads.b_g),
    ];
    for (da, wx, wh, gwx, gwh, gb) in gate_parts {
        gwx.add_outer(da, &cache.x);
        gwh.add_outer(da, &cache.h_prev);
        vec_add(gb, da);
        vec_add(&mut grad_x, &wx.matvec_t(da));
        vec_add(&mut grad_h_prev, &wh.matvec_t(da));
    }

    Ok(LstmBackward {
        grad_x,
        grad_h_prev,
        grad_c_prev,
        grad_params: grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_zero_state_give_zero_output() {
        // sigma(0) = 0.5 and tanh(0) = 0, so g = 0 forces c = h = 0.
        let p = LstmParams::zeros(3, 2);
        let (state, cache) = lstm_cell_forward(&[0.0; 3], &LstmState::zeros(2), &p).unwrap();
        assert!(cache.i.iter().all(|&v| v == 0.5));
        assert!(cache.f.iter().all(|&v| v == 0.5));
        assert!(cache.o.iter().all(|&v| v == 0.5));
        assert!(state.c.iter().all(|&v| v == 0.0));
        assert!(state.h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_params_nonzero_cell_state() {
        // With all gates at 0.5 and c_prev = 2: c = 1, h = 0.5 * tanh(1).
        let p = LstmParams::zeros(1, 1);
        let prev = LstmState {
            h: vec![0.0],
            c: vec![2.0],
        };
        let (state, _) = lstm_cell_forward(&[0.0], &prev, &p).unwrap();
        assert!((state.c[0] - 1.0).abs() < 1e-15);
        assert!((state.h[0] - 0.5 * 1.0f64.tanh()).abs() < 1e-15);
        assert!((state.h[0] - 0.380797).abs() < 1e-6);
    }

    #[test]
    fn gates_stay_in_open_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = LstmParams::init(4, 5, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (state, cache) = lstm_cell_forward(&x, &LstmState::zeros(5), &p).unwrap();
        for gate in [&cache.i, &cache.f, &cache.o] {
            assert!(gate.iter().all(|&v| v > 0.0 && v < 1.0));
        }
        assert!(state.h.iter().all(|&v| v > -1.0 && v < 1.0));
    }

    #[test]
    fn shape_mismatch_is_structural_error() {
        let p = LstmParams::zeros(3, 2);
        let err = lstm_cell_forward(&[0.0; 4], &LstmState::zeros(2), &p).unwrap_err();
        assert!(matches!(err, crate::Error::Shape(_)));

        let (_, cache) = lstm_cell_forward(&[0.0; 3], &LstmState::zeros(2), &p).unwrap();
        let other = LstmParams::zeros(5, 2);
        let err = lstm_cell_backward(&[0.0; 2], &[0.0; 2], &cache, &other).unwrap_err();
        assert!(matches!(err, crate::Error::Shape(_)));
    }

    #[test]
    fn zero_upstream_gradients_give_zero_param_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = LstmParams::init(3, 4, &mut rng);
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, cache) = lstm_cell_forward(&x, &LstmState::zeros(4), &p).unwrap();
        let back = lstm_cell_backward(&[0.0; 4], &[0.0; 4], &cache, &p).unwrap();
        for (_, data, _) in back.grad_params.tensors() {
            assert!(data.iter().all(|&v| v == 0.0));
        }
        assert!(back.grad_x.iter().all(|&v| v == 0.0));
    }
}
