//! The self-attention enhanced LSTM autoencoder.
//!
//! Encoder: a first LSTM layer unrolled over the window, self-attention
//! over its hidden states added back residually (`h'_t = h_t + attn_t`),
//! a second LSTM layer over the augmented states, and a ReLU bottleneck on
//! the final hidden state. Decoder: the latent vector repeated over the
//! sequence, two LSTM layers mirroring the encoder widths, and a linear
//! per-step projection back to feature space.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{
    additive_attention_backward, additive_attention_forward, attention_backward,
    attention_forward, dense_backward, dense_forward, lstm_cell_backward, lstm_cell_forward,
    mse_loss, Activation, AdditiveAttentionCache, AdditiveAttentionParams, AttentionCache,
    AttentionParams, DenseCache, LstmCache, LstmParams, LstmState, Matrix,
};
use crate::window::{NormStats, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionVariant {
    ScaledDotProduct,
    Additive,
}

/// Architecture hyperparameters. Defaults follow the 50/25-unit two-layer
/// encoder with 4 attention heads of key dimension 50.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub input_dim: usize,
    /// Hidden widths of the two encoder LSTM layers; the decoder mirrors
    /// them in reverse.
    pub encoder_units: Vec<usize>,
    pub num_heads: usize,
    /// Per-head key dimension (the output projection maps
    /// `num_heads * key_dim` back to the first encoder width).
    pub key_dim: usize,
    pub seq_len: usize,
    pub bottleneck_activation: Activation,
    pub attention_variant: AttentionVariant,
    /// Hidden width of the additive-attention scorer (unused by the
    /// scaled dot-product path).
    pub additive_score_dim: usize,
    /// Unroll the decoder from the last time step back to the first.
    pub decoder_reverse: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dim: 2,
            encoder_units: vec![50, 25],
            num_heads: 4,
            key_dim: 50,
            seq_len: 10,
            bottleneck_activation: Activation::Relu,
            attention_variant: AttentionVariant::ScaledDotProduct,
            additive_score_dim: 16,
            decoder_reverse: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("input_dim must be >= 1"));
        }
        if self.encoder_units.len() != 2 || self.encoder_units.iter().any(|&u| u == 0) {
            return Err(Error::config(format!(
                "encoder_units must be two positive widths, got {:?}",
                self.encoder_units
            )));
        }
        if self.num_heads == 0 || self.key_dim == 0 {
            return Err(Error::config("num_heads and key_dim must be >= 1"));
        }
        if self.seq_len == 0 {
            return Err(Error::config("seq_len must be >= 1"));
        }
        if self.additive_score_dim == 0 {
            return Err(Error::config("additive_score_dim must be >= 1"));
        }
        Ok(())
    }

    /// Width of the latent code: the final encoder hidden width.
    pub fn latent_dim(&self) -> usize {
        *self.encoder_units.last().unwrap()
    }
}

/// Attention weights for whichever variant the config selects.
#[derive(Debug, Clone, PartialEq)]
pub enum AttnParams {
    ScaledDotProduct(AttentionParams),
    Additive(AdditiveAttentionParams),
}

/// All trainable weights, in the order data flows through them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub enc1: LstmParams,
    pub attn: AttnParams,
    pub enc2: LstmParams,
    pub bottleneck_w: Matrix,
    pub bottleneck_b: Vec<f64>,
    pub dec1: LstmParams,
    pub dec2: LstmParams,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

/// Deterministic seeded initialization; every matrix is
/// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases start at zero.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ModelParams> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.input_dim;
    let d1 = cfg.encoder_units[0];
    let d2 = cfg.encoder_units[1];
    let latent = cfg.latent_dim();

    let enc1 = LstmParams::init(n, d1, &mut rng);
    let attn = match cfg.attention_variant {
        AttentionVariant::ScaledDotProduct => AttnParams::ScaledDotProduct(AttentionParams::init(
            d1,
            cfg.num_heads,
            cfg.key_dim,
            &mut rng,
        )),
        AttentionVariant::Additive => AttnParams::Additive(AdditiveAttentionParams::init(
            d1,
            cfg.additive_score_dim,
            &mut rng,
        )),
    };
    let enc2 = LstmParams::init(d1, d2, &mut rng);
    let bottleneck_w = Matrix::init_uniform(latent, d2, d2, &mut rng);
    let dec1 = LstmParams::init(latent, d2, &mut rng);
    let dec2 = LstmParams::init(d2, d1, &mut rng);
    let w_out = Matrix::init_uniform(n, d1, d1, &mut rng);

    Ok(ModelParams {
        enc1,
        attn,
        enc2,
        bottleneck_w,
        bottleneck_b: vec![0.0; latent],
        dec1,
        dec2,
        w_out,
        b_out: vec![0.0; n],
    })
}

impl ModelParams {
    /// Same shapes, all values zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> ModelParams {
        let attn = match &self.attn {
            AttnParams::ScaledDotProduct(p) => AttnParams::ScaledDotProduct(AttentionParams::zeros(
                p.d_model(),
                p.num_heads,
                p.d_k,
            )),
            AttnParams::Additive(p) => {
                AttnParams::Additive(AdditiveAttentionParams::zeros(p.d_model(), p.d_score()))
            }
        };
        ModelParams {
            enc1: LstmParams::zeros(self.enc1.input_dim(), self.enc1.hidden_dim()),
            attn,
            enc2: LstmParams::zeros(self.enc2.input_dim(), self.enc2.hidden_dim()),
            bottleneck_w: Matrix::zeros(self.bottleneck_w.rows(), self.bottleneck_w.cols()),
            bottleneck_b: vec![0.0; self.bottleneck_b.len()],
            dec1: LstmParams::zeros(self.dec1.input_dim(), self.dec1.hidden_dim()),
            dec2: LstmParams::zeros(self.dec2.input_dim(), self.dec2.hidden_dim()),
            w_out: Matrix::zeros(self.w_out.rows(), self.w_out.cols()),
            b_out: vec![0.0; self.b_out.len()],
        }
    }

    /// Every tensor as `(name, data, shape)` in a fixed serialization
    /// order; bias vectors report shape `(1, len)`.
    pub fn tensors(&self) -> Vec<(String, &[f64], (usize, usize))> {
        let mut out = Vec::new();
        for (suffix, data, shape) in self.enc1.tensors() {
            out.push((format!("enc1.{suffix}"), data, shape));
        }
        match &self.attn {
            AttnParams::ScaledDotProduct(p) => {
                for (name, data, shape) in p.tensors() {
                    out.push((format!("attn.{name}"), data, shape));
                }
            }
            AttnParams::Additive(p) => {
                for (name, data, shape) in p.tensors() {
                    out.push((format!("attn.{name}"), data, shape));
                }
            }
        }
        for (suffix, data, shape) in self.enc2.tensors() {
            out.push((format!("enc2.{suffix}"), data, shape));
        }
        out.push((
            "bottleneck.w".into(),
            self.bottleneck_w.data(),
            self.bottleneck_w.shape(),
        ));
        out.push((
            "bottleneck.b".into(),
            self.bottleneck_b.as_slice(),
            (1, self.bottleneck_b.len()),
        ));
        for (suffix, data, shape) in self.dec1.tensors() {
            out.push((format!("dec1.{suffix}"), data, shape));
        }
        for (suffix, data, shape) in self.dec2.tensors() {
            out.push((format!("dec2.{suffix}"), data, shape));
        }
        out.push(("out.w".into(), self.w_out.data(), self.w_out.shape()));
        out.push(("out.b".into(), self.b_out.as_slice(), (1, self.b_out.len())));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        for (suffix, data) in self.enc1.tensors_mut() {
            out.push((format!("enc1.{suffix}"), data));
        }
        match &mut self.attn {
            AttnParams::ScaledDotProduct(p) => {
                for (name, data) in p.tensors_mut() {
                    out.push((format!("attn.{name}"), data));
                }
            }
            AttnParams::Additive(p) => {
                for (name, data) in p.tensors_mut() {
                    out.push((format!("attn.{name}"), data));
                }
            }
        }
        for (suffix, data) in self.enc2.tensors_mut() {
            out.push((format!("enc2.{suffix}"), data));
        }
        out.push(("bottleneck.w".into(), self.bottleneck_w.data_mut()));
        out.push(("bottleneck.b".into(), self.bottleneck_b.as_mut_slice()));
        for (suffix, data) in self.dec1.tensors_mut() {
            out.push((format!("dec1.{suffix}"), data));
        }
        for (suffix, data) in self.dec2.tensors_mut() {
            out.push((format!("dec2.{suffix}"), data));
        }
        out.push(("out.w".into(), self.w_out.data_mut()));
        out.push(("out.b".into(), self.b_out.as_mut_slice()));
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, d, _)| d.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.num_params());
        for (_, data, _) in self.tensors() {
            flat.extend_from_slice(data);
        }
        flat
    }

    pub fn copy_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::shape(format!(
                "flat vector has {} values, model has {}",
                flat.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        for (_, data) in self.tensors_mut() {
            data.copy_from_slice(&flat[offset..offset + data.len()]);
            offset += data.len();
        }
        Ok(())
    }
}

fn check_window(w: &Window, cfg: &ModelConfig) -> Result<()> {
    if w.seq_len() != cfg.seq_len {
        return Err(Error::argument(format!(
            "window length {} != configured seq_len {}",
            w.seq_len(),
            cfg.seq_len
        )));
    }
    if w.feature_dim() != cfg.input_dim {
        return Err(Error::argument(format!(
            "window feature dim {} != configured input_dim {}",
            w.feature_dim(),
            cfg.input_dim
        )));
    }
    Ok(())
}

/// Unrolls one LSTM layer over the rows of `inputs` from a zero initial
/// state; returns the hidden states as rows and the per-step caches.
fn lstm_unroll(p: &LstmParams, inputs: &Matrix) -> Result<(Matrix, Vec<LstmCache>)> {
    let t = inputs.rows();
    let d = p.hidden_dim();
    let mut state = LstmState::zeros(d);
    let mut hidden = Matrix::zeros(t, d);
    let mut caches = Vec::with_capacity(t);
    for k in 0..t {
        let (next, cache) = lstm_cell_forward(inputs.row(k), &state, p)?;
        hidden.row_mut(k).copy_from_slice(&next.h);
        caches.push(cache);
        state = next;
    }
    Ok((hidden, caches))
}

fn add_lstm_grads(acc: &mut LstmParams, src: &LstmParams) {
    let srcs: Vec<Vec<f64>> = src.tensors().into_iter().map(|(_, d, _)| d.to_vec()).collect();
    for ((_, dst), src) in acc.tensors_mut().into_iter().zip(srcs) {
        for (a, b) in dst.iter_mut().zip(src) {
            *a += b;
        }
    }
}

/// Backpropagation through time over one unrolled layer. `grad_hidden`
/// holds the external gradient on each step's hidden state; returns the
/// parameter gradients and the gradient on each step's input.
fn lstm_bptt(
    p: &LstmParams,
    caches: &[LstmCache],
    grad_hidden: &Matrix,
) -> Result<(LstmParams, Matrix)> {
    let t = caches.len();
    let d = p.hidden_dim();
    let mut grads = LstmParams::zeros(p.input_dim(), d);
    let mut grad_inputs = Matrix::zeros(t, p.input_dim());
    let mut dh_rec = vec![0.0; d];
    let mut dc_rec = vec![0.0; d];
    for k in (0..t).rev() {
        let mut dh = grad_hidden.row(k).to_vec();
        for (a, &b) in dh.iter_mut().zip(&dh_rec) {
            *a += b;
        }
        let back = lstm_cell_backward(&dh, &dc_rec, &caches[k], p)?;
        add_lstm_grads(&mut grads, &back.grad_params);
        grad_inputs.row_mut(k).copy_from_slice(&back.grad_x);
        dh_rec = back.grad_h_prev;
        dc_rec = back.grad_c_prev;
    }
    Ok((grads, grad_inputs))
}

enum AttnCache {
    ScaledDotProduct(AttentionCache),
    Additive(AdditiveAttentionCache),
}

struct EncodeTrace {
    enc1_caches: Vec<LstmCache>,
    attn_cache: AttnCache,
    enc2_caches: Vec<LstmCache>,
    bottleneck_cache: DenseCache,
    /// Attention-augmented first-layer states, `T x d1`.
    h_aug: Matrix,
    latent: Vec<f64>,
}

fn encode_trace(w: &Window, params: &ModelParams, cfg: &ModelConfig) -> Result<EncodeTrace> {
    check_window(w, cfg)?;
    let (h1, enc1_caches) = lstm_unroll(&params.enc1, &w.values)?;

    let (attn_out, attn_cache) = match (&params.attn, cfg.attention_variant) {
        (AttnParams::ScaledDotProduct(p), AttentionVariant::ScaledDotProduct) => {
            let (out, cache) = attention_forward(&h1, p)?;
            (out, AttnCache::ScaledDotProduct(cache))
        }
        (AttnParams::Additive(p), AttentionVariant::Additive) => {
            let (out, cache) = additive_attention_forward(&h1, p)?;
            (out, AttnCache::Additive(cache))
        }
        _ => {
            return Err(Error::config(
                "attention params do not match configured variant",
            ))
        }
    };

    // Residual enrichment keeps the first-layer width.
    let mut h_aug = h1;
    h_aug.add_scaled(&attn_out, 1.0);

    let (h2, enc2_caches) = lstm_unroll(&params.enc2, &h_aug)?;
    let final_hidden = h2.row(h2.rows() - 1);
    let (latent, bottleneck_cache) = dense_forward(
        final_hidden,
        &params.bottleneck_w,
        &params.bottleneck_b,
        cfg.bottleneck_activation,
    )?;

    Ok(EncodeTrace {
        enc1_caches,
        attn_cache,
        enc2_caches,
        bottleneck_cache,
        h_aug,
        latent,
    })
}

/// Encoder pass: attention-augmented first-layer states and the latent
/// code produced from the final second-layer hidden state.
pub fn encode(w: &Window, params: &ModelParams, cfg: &ModelConfig) -> Result<(Matrix, Vec<f64>)> {
    let trace = encode_trace(w, params, cfg)?;
    Ok((trace.h_aug, trace.latent))
}

struct DecodeTrace {
    dec1_caches: Vec<LstmCache>,
    dec2_caches: Vec<LstmCache>,
    out_caches: Vec<DenseCache>,
    x_hat: Matrix,
}

fn decode_trace(latent: &[f64], params: &ModelParams, cfg: &ModelConfig) -> Result<DecodeTrace> {
    if latent.len() != cfg.latent_dim() {
        return Err(Error::shape(format!(
            "latent length {} != configured {}",
            latent.len(),
            cfg.latent_dim()
        )));
    }
    let t = cfg.seq_len;
    let mut repeated = Matrix::zeros(t, latent.len());
    for k in 0..t {
        repeated.row_mut(k).copy_from_slice(latent);
    }
    let (d1_states, dec1_caches) = lstm_unroll(&params.dec1, &repeated)?;
    let (d2_states, dec2_caches) = lstm_unroll(&params.dec2, &d1_states)?;

    let mut x_hat = Matrix::zeros(t, cfg.input_dim);
    let mut out_caches = Vec::with_capacity(t);
    for k in 0..t {
        let (y, cache) = dense_forward(
            d2_states.row(k),
            &params.w_out,
            &params.b_out,
            Activation::Identity,
        )?;
        // Unroll step k writes time step k, or T-1-k when decoding in
        // reverse order.
        let row = if cfg.decoder_reverse { t - 1 - k } else { k };
        x_hat.row_mut(row).copy_from_slice(&y);
        out_caches.push(cache);
    }
    Ok(DecodeTrace {
        dec1_caches,
        dec2_caches,
        out_caches,
        x_hat,
    })
}

/// Decoder pass: the latent repeated over the sequence, two LSTM layers,
/// and the per-step linear projection back to `T x input_dim`.
pub fn decode(latent: &[f64], params: &ModelParams, cfg: &ModelConfig) -> Result<Matrix> {
    Ok(decode_trace(latent, params, cfg)?.x_hat)
}

/// Full reconstruction of a window.
pub fn forward(w: &Window, params: &ModelParams, cfg: &ModelConfig) -> Result<Matrix> {
    let trace = encode_trace(w, params, cfg)?;
    let x_hat = decode_trace(&trace.latent, params, cfg)?.x_hat;
    if !x_hat.is_finite() {
        return Err(Error::numeric("reconstruction is not finite"));
    }
    Ok(x_hat)
}

/// Reconstruction loss of `input` against `target` and exact gradients for
/// every parameter, chained through the whole autoencoder.
pub fn forward_backward(
    input: &Window,
    target: &Window,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<(f64, ModelParams)> {
    check_window(target, cfg)?;
    let enc = encode_trace(input, params, cfg)?;
    let dec = decode_trace(&enc.latent, params, cfg)?;
    let (loss, grad_xhat) = mse_loss(&target.values, &dec.x_hat)?;

    let t = cfg.seq_len;
    let mut grads = params.zeros_like();

    // Output projection, one step at a time.
    let mut grad_d2 = Matrix::zeros(t, params.dec2.hidden_dim());
    for k in 0..t {
        let row = if cfg.decoder_reverse { t - 1 - k } else { k };
        let back = dense_backward(
            grad_xhat.row(row),
            &dec.out_caches[k],
            &params.w_out,
            Activation::Identity,
        )?;
        grads.w_out.add_scaled(&back.grad_w, 1.0);
        for (a, &b) in grads.b_out.iter_mut().zip(&back.grad_b) {
            *a += b;
        }
        grad_d2.row_mut(k).copy_from_slice(&back.grad_x);
    }

    // Decoder stacks.
    let (g_dec2, grad_d1) = lstm_bptt(&params.dec2, &dec.dec2_caches, &grad_d2)?;
    add_lstm_grads(&mut grads.dec2, &g_dec2);
    let (g_dec1, grad_repeated) = lstm_bptt(&params.dec1, &dec.dec1_caches, &grad_d1)?;
    add_lstm_grads(&mut grads.dec1, &g_dec1);

    // The latent fed every decoder step; its gradient is the sum.
    let mut grad_latent = vec![0.0; cfg.latent_dim()];
    for k in 0..t {
        for (a, &b) in grad_latent.iter_mut().zip(grad_repeated.row(k)) {
            *a += b;
        }
    }

    // Bottleneck back to the final second-layer state.
    let back = dense_backward(
        &grad_latent,
        &enc.bottleneck_cache,
        &params.bottleneck_w,
        cfg.bottleneck_activation,
    )?;
    grads.bottleneck_w.add_scaled(&back.grad_w, 1.0);
    for (a, &b) in grads.bottleneck_b.iter_mut().zip(&back.grad_b) {
        *a += b;
    }

    // Encoder layer 2: only the last step receives an external gradient.
    let mut grad_h2 = Matrix::zeros(t, params.enc2.hidden_dim());
    grad_h2.row_mut(t - 1).copy_from_slice(&back.grad_x);
    let (g_enc2, grad_h_aug) = lstm_bptt(&params.enc2, &enc.enc2_caches, &grad_h2)?;
    add_lstm_grads(&mut grads.enc2, &g_enc2);

    // Residual attention block: gradient reaches h1 both directly and
    // through the attention output.
    let mut grad_h1 = grad_h_aug.clone();
    match (&enc.attn_cache, &params.attn, &mut grads.attn) {
        (
            AttnCache::ScaledDotProduct(cache),
            AttnParams::ScaledDotProduct(p),
            AttnParams::ScaledDotProduct(g),
        ) => {
            let (gh, gp) = attention_backward(&grad_h_aug, cache, p)?;
            grad_h1.add_scaled(&gh, 1.0);
            *g = gp;
        }
        (AttnCache::Additive(cache), AttnParams::Additive(p), AttnParams::Additive(g)) => {
            let (gh, gp) = additive_attention_backward(&grad_h_aug, cache, p)?;
            grad_h1.add_scaled(&gh, 1.0);
            *g = gp;
        }
        _ => unreachable!("variant checked in encode"),
    }

    // Encoder layer 1; input gradients are discarded.
    let (g_enc1, _) = lstm_bptt(&params.enc1, &enc.enc1_caches, &grad_h1)?;
    add_lstm_grads(&mut grads.enc1, &g_enc1);

    Ok((loss, grads))
}

// ---------------------------------------------------------------------------
// Checkpoint container: magic, version, JSON header, raw f64 tensors,
// FNV-1a checksum.
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 4] = b"JWCK";
const CHECKPOINT_VERSION: u32 = 1;

/// A trained model with everything needed to run detection: architecture,
/// weights, and the normalization fitted on its training data.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub norm: Option<NormStats>,
}

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    config: ModelConfig,
    norm: Option<NormStats>,
    tensors: Vec<TensorMeta>,
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Serializes a checkpoint. The layout is
/// `JWCK | version u32 | header_len u32 | header JSON | f64 payload | fnv1a u64`,
/// everything little-endian.
pub fn save_params(ck: &Checkpoint, path: &Path) -> Result<()> {
    ck.config.validate()?;
    let tensors = ck.params.tensors();
    let header = CheckpointHeader {
        config: ck.config.clone(),
        norm: ck.norm.clone(),
        tensors: tensors
            .iter()
            .map(|(name, _, (rows, cols))| TensorMeta {
                name: name.clone(),
                rows: *rows,
                cols: *cols,
            })
            .collect(),
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| Error::format(format!("header encode: {e}")))?;

    let mut bytes = Vec::new();
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    for (_, data, _) in &tensors {
        for v in *data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let checksum = fnv1a64(&bytes);
    bytes.extend_from_slice(&checksum.to_le_bytes());
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads a checkpoint back, verifying magic, version, checksum and the
/// shape of every tensor against the stored config.
pub fn load_params(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    if bytes.len() < 4 + 4 + 4 + 8 {
        return Err(Error::format(format!(
            "{}: too short for a checkpoint",
            path.display()
        )));
    }
    if &bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(Error::format(format!(
            "{}: bad magic, not a checkpoint",
            path.display()
        )));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }

    let (payload, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    if fnv1a64(payload) != stored {
        return Err(Error::format(format!(
            "{}: checksum mismatch, file is corrupt",
            path.display()
        )));
    }

    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header_end = 12 + header_len;
    if header_end > payload.len() {
        return Err(Error::format(format!("{}: truncated header", path.display())));
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[12..header_end])
        .map_err(|e| Error::format(format!("{}: header decode: {e}", path.display())))?;
    header.config.validate()?;

    // Rebuild a parameter set of the right shapes and fill it.
    let mut params = init_params(&header.config, 0)?;
    let expected: Vec<(String, usize)> = params
        .tensors()
        .iter()
        .map(|(n, d, _)| (n.clone(), d.len()))
        .collect();
    if header.tensors.len() != expected.len() {
        return Err(Error::format(format!(
            "{}: {} tensors stored, config implies {}",
            path.display(),
            header.tensors.len(),
            expected.len()
        )));
    }
    let total: usize = header.tensors.iter().map(|t| t.rows * t.cols).sum();
    if header_end + total * 8 != payload.len() {
        return Err(Error::format(format!(
            "{}: payload holds {} bytes, header implies {}",
            path.display(),
            payload.len() - header_end,
            total * 8
        )));
    }

    for (meta, (name, len)) in header.tensors.iter().zip(&expected) {
        if &meta.name != name || meta.rows * meta.cols != *len {
            return Err(Error::format(format!(
                "{}: tensor {} ({}x{}) does not match config ({} of {} values)",
                path.display(),
                meta.name,
                meta.rows,
                meta.cols,
                name,
                len
            )));
        }
    }

    let mut offset = header_end;
    for (_, data) in params.tensors_mut() {
        for v in data.iter_mut() {
            *v = f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
            offset += 8;
        }
    }

    Ok(Checkpoint {
        config: header.config,
        params,
        norm: header.norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            input_dim: 2,
            encoder_units: vec![4, 3],
            num_heads: 1,
            key_dim: 2,
            seq_len: 3,
            ..ModelConfig::default()
        }
    }

    fn window_from(values: Matrix) -> Window {
        Window {
            values,
            origin_index: 0,
            label: 0,
        }
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let cfg = tiny_config();
        let a = init_params(&cfg, 5).unwrap();
        let b = init_params(&cfg, 5).unwrap();
        assert_eq!(a, b);
        let c = init_params(&cfg, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn default_shapes_follow_the_chain() {
        let cfg = ModelConfig::default();
        let p = init_params(&cfg, 1).unwrap();
        assert_eq!(p.enc1.w_ix.shape(), (50, 2));
        assert_eq!(p.enc2.w_ix.shape(), (25, 50));
        match &p.attn {
            AttnParams::ScaledDotProduct(a) => {
                assert_eq!(a.w_q.len(), 4);
                assert_eq!(a.w_q[0].shape(), (50, 50));
                assert_eq!(a.w_o.shape(), (200, 50));
            }
            _ => panic!("default variant is scaled dot-product"),
        }
        assert_eq!(p.bottleneck_w.shape(), (25, 25));
        assert_eq!(p.dec1.w_ix.shape(), (25, 25));
        assert_eq!(p.dec2.w_ix.shape(), (50, 25));
        assert_eq!(p.w_out.shape(), (2, 50));
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = tiny_config();
        cfg.encoder_units = vec![4];
        assert!(matches!(
            init_params(&cfg, 0).unwrap_err(),
            Error::Config(_)
        ));
    }

    #[test]
    fn zero_params_propagate_zero() {
        let cfg = tiny_config();
        let params = init_params(&cfg, 3).unwrap().zeros_like();
        let w = window_from(Matrix::zeros(3, 2));
        let (_, latent) = encode(&w, &params, &cfg).unwrap();
        assert!(latent.iter().all(|&v| v == 0.0));
        let x_hat = decode(&latent, &params, &cfg).unwrap();
        assert!(x_hat.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bias_only_output_projection() {
        let cfg = tiny_config();
        let mut params = init_params(&cfg, 3).unwrap().zeros_like();
        params.b_out = vec![0.25, -0.75];
        let x_hat = decode(&vec![0.0; cfg.latent_dim()], &params, &cfg).unwrap();
        for t in 0..cfg.seq_len {
            assert_eq!(x_hat.row(t), &[0.25, -0.75]);
        }
    }

    #[test]
    fn forward_shape_matches_input_and_is_deterministic() {
        let cfg = tiny_config();
        let params = init_params(&cfg, 9).unwrap();
        let mut values = Matrix::zeros(3, 2);
        for (k, v) in values.data_mut().iter_mut().enumerate() {
            *v = (k as f64 * 0.37).sin();
        }
        let w = window_from(values);
        let a = forward(&w, &params, &cfg).unwrap();
        assert_eq!(a.shape(), (3, 2));
        let b = forward(&w, &params, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perfect_target_gives_zero_loss_and_zero_grads() {
        let cfg = tiny_config();
        let params = init_params(&cfg, 4).unwrap();
        let mut values = Matrix::zeros(3, 2);
        for (k, v) in values.data_mut().iter_mut().enumerate() {
            *v = (k as f64 * 0.61).cos();
        }
        let w = window_from(values);
        let x_hat = forward(&w, &params, &cfg).unwrap();
        let target = window_from(x_hat);
        let (loss, grads) = forward_backward(&w, &target, &params, &cfg).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_window_length_rejected() {
        let cfg = tiny_config();
        let params = init_params(&cfg, 4).unwrap();
        let w = window_from(Matrix::zeros(5, 2));
        assert!(matches!(
            forward(&w, &params, &cfg).unwrap_err(),
            Error::Argument(_)
        ));
    }

    #[test]
    fn flat_round_trip() {
        let cfg = tiny_config();
        let params = init_params(&cfg, 8).unwrap();
        let flat = params.to_flat();
        let mut other = init_params(&cfg, 99).unwrap();
        other.copy_from_flat(&flat).unwrap();
        assert_eq!(params, other);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let cfg = tiny_config();
        let params = init_params(&cfg, 12).unwrap();
        let norm = NormStats {
            mean: vec![0.1, -0.2],
            std: vec![1.5, 2.5],
        };
        save_params(
            &Checkpoint {
                config: cfg.clone(),
                params: params.clone(),
                norm: Some(norm.clone()),
            },
            &path,
        )
        .unwrap();
        let back = load_params(&path).unwrap();
        assert_eq!(back.config, cfg);
        assert_eq!(back.params, params);
        assert_eq!(back.norm, Some(norm));
    }

    #[test]
    fn truncated_checkpoint_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let cfg = tiny_config();
        let params = init_params(&cfg, 12).unwrap();
        save_params(
            &Checkpoint {
                config: cfg,
                params,
                norm: None,
            },
            &path,
        )
        .unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 16]).unwrap();
        assert!(matches!(load_params(&path).unwrap_err(), Error::Format(_)));
    }

    #[test]
    fn version_mismatch_is_version_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let cfg = tiny_config();
        let params = init_params(&cfg, 12).unwrap();
        save_params(
            &Checkpoint {
                config: cfg,
                params,
                norm: None,
            },
            &path,
        )
        .unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 0xFF; // bump the version field
        let tail = bytes.len() - 8;
        let sum = fnv1a64(&bytes[..tail]);
        bytes[tail..].copy_from_slice(&sum.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_params(&path).unwrap_err(),
            Error::Version { .. }
        ));
    }
}
