//! Fully connected layer `y = act(W x + b)` with the three activations the
//! model uses.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed in terms of the pre-activation `x`.
    #[inline]
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    x: Vec<f64>,
    preact: Vec<f64>,
}

/// Forward pass. `w` is `out x in`, `b` has length `out`.
pub fn dense_forward(
    x: &[f64],
    w: &Matrix,
    b: &[f64],
    activation: Activation,
) -> Result<(Vec<f64>, DenseCache)> {
    if x.len() != w.cols() || b.len() != w.rows() {
        return Err(Error::shape(format!(
            "dense shapes: x {} vs w {:?}, b {}",
            x.len(),
            w.shape(),
            b.len()
        )));
    }
    let mut preact = w.matvec(x);
    for (p, &bi) in preact.iter_mut().zip(b) {
        *p += bi;
    }
    let y = preact.iter().map(|&p| activation.apply(p)).collect();
    Ok((
        y,
        DenseCache {
            x: x.to_vec(),
            preact,
        },
    ))
}

#[derive(Debug)]
pub struct DenseBackward {
    pub grad_x: Vec<f64>,
    pub grad_w: Matrix,
    pub grad_b: Vec<f64>,
}

/// Exact gradients of [`dense_forward`] given the upstream gradient on `y`.
pub fn dense_backward(
    grad_y: &[f64],
    cache: &DenseCache,
    w: &Matrix,
    activation: Activation,
) -> Result<DenseBackward> {
    if grad_y.len() != w.rows() || cache.x.len() != w.cols() || cache.preact.len() != w.rows() {
        return Err(Error::shape("dense backward: cache/params disagree"));
    }
    let d_pre: Vec<f64> = grad_y
        .iter()
        .zip(&cache.preact)
        .map(|(&gy, &p)| gy * activation.derivative(p))
        .collect();
    let mut grad_w = Matrix::zeros(w.rows(), w.cols());
    grad_w.add_outer(&d_pre, &cache.x);
    Ok(DenseBackward {
        grad_x: w.matvec_t(&d_pre),
        grad_w,
        grad_b: d_pre,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_clamps_negatives() {
        let w = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let (y, _) = dense_forward(&[-1.0, 0.0, 2.0], &w, &[0.0; 3], Activation::Relu).unwrap();
        assert_eq!(y, vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn identity_with_unit_weights_passes_through() {
        let w = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let (y, _) = dense_forward(&[0.25, -3.5], &w, &[0.0; 2], Activation::Identity).unwrap();
        assert_eq!(y, vec![0.25, -3.5]);
    }

    #[test]
    fn tanh_dense_matches_plain_rnn_update() {
        // Eq-1 style recurrence h_t = tanh(W_hh h + W_hx x + b) is a dense
        // layer over the stacked vector [h; x]; used only as an oracle shape.
        let w_hh = [[0.5, -0.2], [0.1, 0.3]];
        let w_hx = [[1.0], [-1.0]];
        let b = [0.05, -0.05];
        let h = [0.3, -0.4];
        let x = [0.7];

        let stacked = Matrix::from_rows(&[vec![0.5, -0.2, 1.0], vec![0.1, 0.3, -1.0]]);
        let (y, _) =
            dense_forward(&[h[0], h[1], x[0]], &stacked, &b, Activation::Tanh).unwrap();

        for k in 0..2 {
            let pre = w_hh[k][0] * h[0] + w_hh[k][1] * h[1] + w_hx[k][0] * x[0] + b[k];
            assert!((y[k] - pre.tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let w = Matrix::zeros(2, 3);
        let err = dense_forward(&[0.0; 2], &w, &[0.0; 2], Activation::Identity).unwrap_err();
        assert!(matches!(err, crate::Error::Shape(_)));
    }
}
