//! Self-attention over a sequence of hidden states.
//!
//! Two formulations live here. The production path is multi-head scaled
//! dot-product attention: per head `Q = H W_q`, `K = H W_k`, `V = H W_v`,
//! weights `softmax(Q K^T / sqrt(d_k))`, heads concatenated and projected
//! by `W_o`. The additive variant scores every state pair with a small
//! feedforward scorer and returns the per-step context vectors; it is kept
//! as a selectable alternative and carries the same gradient guarantees.

use rand::Rng;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Multi-head attention weights. `w_q[h]`, `w_k[h]`, `w_v[h]` are
/// `d_model x d_k`; `w_o` is `(heads * d_k) x d_model`. No biases.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_q: Vec<Matrix>,
    pub w_k: Vec<Matrix>,
    pub w_v: Vec<Matrix>,
    pub w_o: Matrix,
    pub num_heads: usize,
    pub d_k: usize,
}

impl AttentionParams {
    pub fn zeros(d_model: usize, num_heads: usize, d_k: usize) -> Self {
        AttentionParams {
            w_q: (0..num_heads).map(|_| Matrix::zeros(d_model, d_k)).collect(),
            w_k: (0..num_heads).map(|_| Matrix::zeros(d_model, d_k)).collect(),
            w_v: (0..num_heads).map(|_| Matrix::zeros(d_model, d_k)).collect(),
            w_o: Matrix::zeros(num_heads * d_k, d_model),
            num_heads,
            d_k,
        }
    }

    pub fn init(d_model: usize, num_heads: usize, d_k: usize, rng: &mut impl Rng) -> Self {
        let mut w_q = Vec::with_capacity(num_heads);
        let mut w_k = Vec::with_capacity(num_heads);
        let mut w_v = Vec::with_capacity(num_heads);
        for _ in 0..num_heads {
            w_q.push(Matrix::init_uniform(d_model, d_k, d_model, rng));
            w_k.push(Matrix::init_uniform(d_model, d_k, d_model, rng));
            w_v.push(Matrix::init_uniform(d_model, d_k, d_model, rng));
        }
        let w_o = Matrix::init_uniform(num_heads * d_k, d_model, num_heads * d_k, rng);
        AttentionParams {
            w_q,
            w_k,
            w_v,
            w_o,
            num_heads,
            d_k,
        }
    }

    pub fn d_model(&self) -> usize {
        self.w_o.cols()
    }

    fn check(&self) -> Result<()> {
        if self.num_heads == 0 || self.d_k == 0 {
            return Err(Error::shape("attention needs num_heads >= 1 and d_k >= 1"));
        }
        let d_model = self.d_model();
        for mats in [&self.w_q, &self.w_k, &self.w_v] {
            if mats.len() != self.num_heads {
                return Err(Error::shape("per-head matrix count != num_heads"));
            }
            for m in mats {
                if m.shape() != (d_model, self.d_k) {
                    return Err(Error::shape(format!(
                        "head projection is {:?}, expected ({d_model}, {})",
                        m.shape(),
                        self.d_k
                    )));
                }
            }
        }
        if self.w_o.rows() != self.num_heads * self.d_k {
            return Err(Error::shape(format!(
                "w_o rows {} != heads * d_k = {}",
                self.w_o.rows(),
                self.num_heads * self.d_k
            )));
        }
        Ok(())
    }

    pub fn tensors(&self) -> Vec<(String, &[f64], (usize, usize))> {
        let mut out = Vec::new();
        for h in 0..self.num_heads {
            out.push((format!("h{h}.w_q"), self.w_q[h].data(), self.w_q[h].shape()));
            out.push((format!("h{h}.w_k"), self.w_k[h].data(), self.w_k[h].shape()));
            out.push((format!("h{h}.w_v"), self.w_v[h].data(), self.w_v[h].shape()));
        }
        out.push(("w_o".to_string(), self.w_o.data(), self.w_o.shape()));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for (h, ((q, k), v)) in self
            .w_q
            .iter_mut()
            .zip(self.w_k.iter_mut())
            .zip(self.w_v.iter_mut())
            .enumerate()
        {
            out.push((format!("h{h}.w_q"), q.data_mut()));
            out.push((format!("h{h}.w_k"), k.data_mut()));
            out.push((format!("h{h}.w_v"), v.data_mut()));
        }
        out.push(("w_o".to_string(), self.w_o.data_mut()));
        out
    }
}

/// Row-wise softmax with per-row max subtraction. Every output row is
/// nonnegative and sums to 1.
pub fn softmax_rows(scores: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(scores.rows(), scores.cols());
    for r in 0..scores.rows() {
        let row = scores.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out_row = out.row_mut(r);
        let mut sum = 0.0;
        for (o, &s) in out_row.iter_mut().zip(row) {
            *o = (s - max).exp();
            sum += *o;
        }
        for o in out_row.iter_mut() {
            *o /= sum;
        }
    }
    out
}

/// Backward through a row-wise softmax: for each row,
/// `d_score = alpha ⊙ (d_alpha - <d_alpha, alpha>)`.
pub fn softmax_rows_backward(alpha: &Matrix, grad_alpha: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(alpha.rows(), alpha.cols());
    for r in 0..alpha.rows() {
        let a = alpha.row(r);
        let da = grad_alpha.row(r);
        let dot: f64 = a.iter().zip(da).map(|(&x, &y)| x * y).sum();
        for (o, (&ai, &dai)) in out.row_mut(r).iter_mut().zip(a.iter().zip(da)) {
            *o = ai * (dai - dot);
        }
    }
    out
}

/// Per-head intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct AttentionCache {
    pub input: Matrix,
    q: Vec<Matrix>,
    k: Vec<Matrix>,
    v: Vec<Matrix>,
    /// Row-stochastic attention weights per head, each `T x T`.
    pub weights: Vec<Matrix>,
    concat: Matrix,
}

/// Multi-head scaled dot-product attention over `h` (`T x d_model`).
/// Returns the projected output (`T x d_model`) and the cache.
pub fn attention_forward(h: &Matrix, p: &AttentionParams) -> Result<(Matrix, AttentionCache)> {
    p.check()?;
    let t = h.rows();
    if t == 0 {
        return Err(Error::argument("attention needs at least one time step"));
    }
    if h.cols() != p.d_model() {
        return Err(Error::shape(format!(
            "input width {} != d_model {}",
            h.cols(),
            p.d_model()
        )));
    }

    let scale = 1.0 / (p.d_k as f64).sqrt();
    let mut q = Vec::with_capacity(p.num_heads);
    let mut k = Vec::with_capacity(p.num_heads);
    let mut v = Vec::with_capacity(p.num_heads);
    let mut weights = Vec::with_capacity(p.num_heads);
    let mut concat = Matrix::zeros(t, p.num_heads * p.d_k);

    for head in 0..p.num_heads {
        let qh = h.matmul(&p.w_q[head]);
        let kh = h.matmul(&p.w_k[head]);
        let vh = h.matmul(&p.w_v[head]);
        let mut scores = qh.matmul_transb(&kh);
        scores.scale(scale);
        if !scores.is_finite() {
            return Err(Error::numeric("attention scores are not finite"));
        }
        let alpha = softmax_rows(&scores);
        let head_out = alpha.matmul(&vh);
        for r in 0..t {
            let dst = &mut concat.row_mut(r)[head * p.d_k..(head + 1) * p.d_k];
            dst.copy_from_slice(head_out.row(r));
        }
        q.push(qh);
        k.push(kh);
        v.push(vh);
        weights.push(alpha);
    }

    let out = concat.matmul(&p.w_o);
    if !out.is_finite() {
        return Err(Error::numeric("attention output is not finite"));
    }
    Ok((
        out,
        AttentionCache {
            input: h.clone(),
            q,
            k,
            v,
            weights,
            concat,
        },
    ))
}

/// Gradients of [`attention_forward`] with respect to the input sequence
/// and every projection matrix.
pub fn attention_backward(
    grad_out: &Matrix,
    cache: &AttentionCache,
    p: &AttentionParams,
) -> Result<(Matrix, AttentionParams)> {
    p.check()?;
    let t = cache.input.rows();
    if grad_out.shape() != (t, p.d_model()) {
        return Err(Error::shape(format!(
            "upstream gradient is {:?}, expected ({t}, {})",
            grad_out.shape(),
            p.d_model()
        )));
    }
    if cache.weights.len() != p.num_heads || cache.concat.cols() != p.num_heads * p.d_k {
        return Err(Error::shape("cache does not match attention params"));
    }

    let mut grads = AttentionParams::zeros(p.d_model(), p.num_heads, p.d_k);
    // Output projection.
    grads.w_o = cache.concat.matmul_transa(grad_out);
    let grad_concat = grad_out.matmul_transb(&p.w_o);

    let scale = 1.0 / (p.d_k as f64).sqrt();
    let mut grad_h = Matrix::zeros(t, p.d_model());

    for head in 0..p.num_heads {
        // Slice this head's share of the concat gradient.
        let mut grad_head = Matrix::zeros(t, p.d_k);
        for r in 0..t {
            grad_head
                .row_mut(r)
                .copy_from_slice(&grad_concat.row(r)[head * p.d_k..(head + 1) * p.d_k]);
        }

        let alpha = &cache.weights[head];
        let grad_alpha = grad_head.matmul_transb(&cache.v[head]);
        let grad_v = alpha.matmul_transa(&grad_head);
        let mut grad_scores = softmax_rows_backward(alpha, &grad_alpha);
        grad_scores.scale(scale);
        let grad_q = grad_scores.matmul(&cache.k[head]);
        let grad_k = grad_scores.matmul_transa(&cache.q[head]);

        grads.w_q[head] = cache.input.matmul_transa(&grad_q);
        grads.w_k[head] = cache.input.matmul_transa(&grad_k);
        grads.w_v[head] = cache.input.matmul_transa(&grad_v);

        grad_h.add_scaled(&grad_q.matmul_transb(&p.w_q[head]), 1.0);
        grad_h.add_scaled(&grad_k.matmul_transb(&p.w_k[head]), 1.0);
        grad_h.add_scaled(&grad_v.matmul_transb(&p.w_v[head]), 1.0);
    }

    Ok((grad_h, grads))
}

/// Parameters of the additive-attention scorer: a one-hidden-layer tanh
/// network `e(h_t, h_j) = v^T tanh(W_t h_t + W_j h_j + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveAttentionParams {
    pub w_query: Matrix,
    pub w_key: Matrix,
    pub bias: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdditiveAttentionParams {
    pub fn zeros(d_model: usize, d_score: usize) -> Self {
        AdditiveAttentionParams {
            w_query: Matrix::zeros(d_score, d_model),
            w_key: Matrix::zeros(d_score, d_model),
            bias: vec![0.0; d_score],
            v: vec![0.0; d_score],
        }
    }

    pub fn init(d_model: usize, d_score: usize, rng: &mut impl Rng) -> Self {
        AdditiveAttentionParams {
            w_query: Matrix::init_uniform(d_score, d_model, d_model, rng),
            w_key: Matrix::init_uniform(d_score, d_model, d_model, rng),
            bias: vec![0.0; d_score],
            v: Matrix::init_uniform(1, d_score, d_score, rng).data().to_vec(),
        }
    }

    pub fn d_model(&self) -> usize {
        self.w_query.cols()
    }

    pub fn d_score(&self) -> usize {
        self.w_query.rows()
    }

    pub fn tensors(&self) -> Vec<(String, &[f64], (usize, usize))> {
        let s = self.d_score();
        vec![
            ("w_query".into(), self.w_query.data(), self.w_query.shape()),
            ("w_key".into(), self.w_key.data(), self.w_key.shape()),
            ("bias".into(), self.bias.as_slice(), (1, s)),
            ("v".into(), self.v.as_slice(), (1, s)),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        vec![
            ("w_query".into(), self.w_query.data_mut()),
            ("w_key".into(), self.w_key.data_mut()),
            ("bias".into(), self.bias.as_mut_slice()),
            ("v".into(), self.v.as_mut_slice()),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct AdditiveAttentionCache {
    pub input: Matrix,
    /// tanh of the scorer hidden layer for every (t, j) pair, `T*T x d_score`.
    scorer_tanh: Matrix,
    /// Attention weights, `T x T`, rows sum to 1.
    pub weights: Matrix,
}

/// Additive attention: alignment scores from the feedforward scorer, a
/// row softmax, and context vectors `c_t = sum_j alpha_tj h_j`.
pub fn additive_attention_forward(
    h: &Matrix,
    p: &AdditiveAttentionParams,
) -> Result<(Matrix, AdditiveAttentionCache)> {
    let t = h.rows();
    if t == 0 {
        return Err(Error::argument("attention needs at least one time step"));
    }
    if h.cols() != p.d_model() {
        return Err(Error::shape(format!(
            "input width {} != scorer d_model {}",
            h.cols(),
            p.d_model()
        )));
    }

    let d_s = p.d_score();
    // Precompute W_t h_t and W_j h_j once per step.
    let proj_q: Vec<Vec<f64>> = (0..t).map(|i| p.w_query.matvec(h.row(i))).collect();
    let proj_k: Vec<Vec<f64>> = (0..t).map(|j| p.w_key.matvec(h.row(j))).collect();

    let mut scores = Matrix::zeros(t, t);
    let mut scorer_tanh = Matrix::zeros(t * t, d_s);
    for i in 0..t {
        for j in 0..t {
            let row = scorer_tanh.row_mut(i * t + j);
            let mut e = 0.0;
            for s in 0..d_s {
                let u = (proj_q[i][s] + proj_k[j][s] + p.bias[s]).tanh();
                row[s] = u;
                e += p.v[s] * u;
            }
            scores.set(i, j, e);
        }
    }
    if !scores.is_finite() {
        return Err(Error::numeric("alignment scores are not finite"));
    }
    let weights = softmax_rows(&scores);
    let context = weights.matmul(h);

    Ok((
        context,
        AdditiveAttentionCache {
            input: h.clone(),
            scorer_tanh,
            weights,
        },
    ))
}

/// Gradients of [`additive_attention_forward`].
pub fn additive_attention_backward(
    grad_context: &Matrix,
    cache: &AdditiveAttentionCache,
    p: &AdditiveAttentionParams,
) -> Result<(Matrix, AdditiveAttentionParams)> {
    let t = cache.input.rows();
    let d_s = p.d_score();
    if grad_context.shape() != (t, p.d_model()) {
        return Err(Error::shape(format!(
            "upstream gradient is {:?}, expected ({t}, {})",
            grad_context.shape(),
            p.d_model()
        )));
    }
    if cache.weights.shape() != (t, t) || cache.scorer_tanh.shape() != (t * t, d_s) {
        return Err(Error::shape("cache does not match scorer params"));
    }

    // c = alpha * H: gradient reaches both factors.
    let grad_alpha = grad_context.matmul_transb(&cache.input);
    let mut grad_h = cache.weights.matmul_transa(grad_context);
    let grad_scores = softmax_rows_backward(&cache.weights, &grad_alpha);

    let mut grads = AdditiveAttentionParams::zeros(p.d_model(), d_s);
    for i in 0..t {
        for j in 0..t {
            let de = grad_scores.get(i, j);
            if de == 0.0 {
                continue;
            }
            let u = cache.scorer_tanh.row(i * t + j);
            // d_hidden = de * v ⊙ (1 - u^2)
            let mut d_hidden = vec![0.0; d_s];
            for s in 0..d_s {
                grads.v[s] += de * u[s];
                d_hidden[s] = de * p.v[s] * (1.0 - u[s] * u[s]);
            }
            grads.w_query.add_outer(&d_hidden, cache.input.row(i));
            grads.w_key.add_outer(&d_hidden, cache.input.row(j));
            for s in 0..d_s {
                grads.bias[s] += d_hidden[s];
            }
            let gq = p.w_query.matvec_t(&d_hidden);
            let gk = p.w_key.matvec_t(&d_hidden);
            for (dst, &g) in grad_h.row_mut(i).iter_mut().zip(&gq) {
                *dst += g;
            }
            for (dst, &g) in grad_h.row_mut(j).iter_mut().zip(&gk) {
                *dst += g;
            }
        }
    }

    Ok((grad_h, grads))
}
