//! Central finite-difference gradient oracle. Deliberately naive: two
//! function evaluations per coordinate, no caching, so it stays independent
//! of every analytic backward pass it is used to check.

pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Central differences `(f(p + eps e_k) - f(p - eps e_k)) / (2 eps)` for
/// every coordinate of `params`.
pub fn finite_difference_gradient<F>(mut f: F, params: &[f64], eps: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut point = params.to_vec();
    let mut grads = vec![0.0; params.len()];
    for k in 0..params.len() {
        let orig = point[k];
        point[k] = orig + eps;
        let plus = f(&point);
        point[k] = orig - eps;
        let minus = f(&point);
        point[k] = orig;
        grads[k] = (plus - minus) / (2.0 * eps);
    }
    grads
}

/// Relative error between an analytic and a finite-difference gradient
/// component, with a magnitude floor so near-zero gradients compare on an
/// absolute scale.
pub fn gradient_rel_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-3);
    (analytic - numeric).abs() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_derivative() {
        let g = finite_difference_gradient(|p| p[0] * p[0], &[3.0], DEFAULT_EPSILON);
        assert!((g[0] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let g = finite_difference_gradient(|_| 42.0, &[1.0, -2.0, 0.3], DEFAULT_EPSILON);
        assert!(g.iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn quadratic_form_matches_closed_form() {
        // f(x) = x^T A x has gradient (A + A^T) x.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 4;
        let a: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();

        let f = |p: &[f64]| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += p[i] * a[i][j] * p[j];
                }
            }
            acc
        };
        let g = finite_difference_gradient(f, &x, DEFAULT_EPSILON);
        for i in 0..n {
            let expected: f64 = (0..n).map(|j| (a[i][j] + a[j][i]) * x[j]).sum();
            assert!((g[i] - expected).abs() < 1e-6);
        }
    }
}
