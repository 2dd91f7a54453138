//! Reconstruction loss: per-step squared Euclidean distance averaged over
//! time, `L = (1/T) sum_t ||x_t - x_hat_t||^2`.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Loss value and its gradient with respect to the reconstruction `x_hat`.
pub fn mse_loss(x: &Matrix, x_hat: &Matrix) -> Result<(f64, Matrix)> {
    if x.shape() != x_hat.shape() {
        return Err(Error::shape(format!(
            "mse shapes {:?} vs {:?}",
            x.shape(),
            x_hat.shape()
        )));
    }
    let t = x.rows() as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    for ((g, &a), &b) in grad.data_mut().iter_mut().zip(x_hat.data()).zip(x.data()) {
        let diff = a - b;
        loss += diff * diff;
        *g = 2.0 * diff / t;
    }
    Ok((loss / t, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_residual_zero_loss() {
        let x = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]);
        let (loss, grad) = mse_loss(&x, &x.clone()).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_two_step_case() {
        // T=2, n=1, residuals 1 and 3: (1 + 9) / 2 = 5.
        let x = Matrix::from_rows(&[vec![0.0], vec![0.0]]);
        let x_hat = Matrix::from_rows(&[vec![1.0], vec![3.0]]);
        let (loss, grad) = mse_loss(&x, &x_hat).unwrap();
        assert!((loss - 5.0).abs() < 1e-15);
        assert!((grad.get(0, 0) - 1.0).abs() < 1e-15);
        assert!((grad.get(1, 0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn loss_is_nonnegative_and_zero_only_at_equality() {
        let x = Matrix::from_rows(&[vec![0.1, 0.2]]);
        let mut y = x.clone();
        y.set(0, 1, 0.2 + 1e-9);
        let (loss, _) = mse_loss(&x, &y).unwrap();
        assert!(loss > 0.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = Matrix::zeros(2, 2);
        let b = Matrix::zeros(3, 2);
        assert!(matches!(
            mse_loss(&a, &b).unwrap_err(),
            crate::Error::Shape(_)
        ));
    }
}
