//! Shared oracles for the integration suites. Everything here is a
//! deliberately naive transcription — explicit loops, no shared code with
//! the library's forward/backward paths — so it can serve as an
//! independent reference.

#![allow(dead_code)]

use jamwatch_core::nn::{AdditiveAttentionParams, AttentionParams, LstmParams, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.random_range(-scale..scale))
            .collect(),
    )
}

pub fn random_vec(len: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-scale..scale)).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Straight-line evaluation of the four-gate update, one arithmetic
/// operation per line of the gate equations.
pub fn lstm_step_oracle(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    p: &LstmParams,
) -> (Vec<f64>, Vec<f64>) {
    let d = p.hidden_dim();
    let n = p.input_dim();
    let mut h = vec![0.0; d];
    let mut c = vec![0.0; d];
    for k in 0..d {
        let mut ai = p.b_i[k];
        let mut af = p.b_f[k];
        let mut ao = p.b_o[k];
        let mut ag = p.b_g[k];
        for j in 0..n {
            ai += p.w_ix.get(k, j) * x[j];
            af += p.w_fx.get(k, j) * x[j];
            ao += p.w_ox.get(k, j) * x[j];
            ag += p.w_gx.get(k, j) * x[j];
        }
        for j in 0..d {
            ai += p.w_ih.get(k, j) * h_prev[j];
            af += p.w_fh.get(k, j) * h_prev[j];
            ao += p.w_oh.get(k, j) * h_prev[j];
            ag += p.w_gh.get(k, j) * h_prev[j];
        }
        let i = sigmoid(ai);
        let f = sigmoid(af);
        let o = sigmoid(ao);
        let g = ag.tanh();
        c[k] = f * c_prev[k] + i * g;
        h[k] = o * c[k].tanh();
    }
    (h, c)
}

/// Naive per-head scaled dot-product attention: explicit sums, no
/// batching, softmax written out longhand.
pub fn mha_oracle(h: &Matrix, p: &AttentionParams) -> Matrix {
    let t = h.rows();
    let d_model = h.cols();
    let d_k = p.d_k;
    let mut concat = vec![vec![0.0; p.num_heads * d_k]; t];

    for head in 0..p.num_heads {
        // Projections.
        let mut q = vec![vec![0.0; d_k]; t];
        let mut k_mat = vec![vec![0.0; d_k]; t];
        let mut v = vec![vec![0.0; d_k]; t];
        for i in 0..t {
            for a in 0..d_k {
                let mut acc_q = 0.0;
                let mut acc_k = 0.0;
                let mut acc_v = 0.0;
                for m in 0..d_model {
                    acc_q += h.get(i, m) * p.w_q[head].get(m, a);
                    acc_k += h.get(i, m) * p.w_k[head].get(m, a);
                    acc_v += h.get(i, m) * p.w_v[head].get(m, a);
                }
                q[i][a] = acc_q;
                k_mat[i][a] = acc_k;
                v[i][a] = acc_v;
            }
        }
        // Scores, softmax, weighted sum.
        for i in 0..t {
            let mut scores = vec![0.0; t];
            for j in 0..t {
                let mut dot = 0.0;
                for a in 0..d_k {
                    dot += q[i][a] * k_mat[j][a];
                }
                scores[j] = dot / (d_k as f64).sqrt();
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            for a in 0..d_k {
                let mut acc = 0.0;
                for j in 0..t {
                    acc += exps[j] / sum * v[j][a];
                }
                concat[i][head * d_k + a] = acc;
            }
        }
    }

    // Output projection.
    let mut out = Matrix::zeros(t, d_model);
    for i in 0..t {
        for m in 0..d_model {
            let mut acc = 0.0;
            for c in 0..p.num_heads * d_k {
                acc += concat[i][c] * p.w_o.get(c, m);
            }
            out.set(i, m, acc);
        }
    }
    out
}

/// Direct evaluation of the alignment-score / softmax / context-vector
/// chain with the one-hidden-layer tanh scorer.
pub fn additive_oracle(h: &Matrix, p: &AdditiveAttentionParams) -> Matrix {
    let t = h.rows();
    let d = h.cols();
    let d_s = p.d_score();
    let mut out = Matrix::zeros(t, d);
    for i in 0..t {
        let mut scores = vec![0.0; t];
        for j in 0..t {
            let mut e = 0.0;
            for s in 0..d_s {
                let mut u = p.bias[s];
                for m in 0..d {
                    u += p.w_query.get(s, m) * h.get(i, m) + p.w_key.get(s, m) * h.get(j, m);
                }
                e += p.v[s] * u.tanh();
            }
            scores[j] = e;
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        for m in 0..d {
            let mut acc = 0.0;
            for j in 0..t {
                acc += exps[j] / sum * h.get(j, m);
            }
            out.set(i, m, acc);
        }
    }
    out
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
