//! Denoising training loop: corrupt each window with Gaussian noise, ask
//! the autoencoder to reconstruct the clean original, and update with
//! Adam. Only normal-labeled windows are ever trained on; a held-out
//! fraction is scored uncorrupted every epoch.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{forward, forward_backward, init_params, ModelConfig, ModelParams};
use crate::nn::{adam_step, mse_loss, AdamState};
use crate::window::Window;

/// Optimization hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Standard deviation of the corruption noise added to inputs.
    pub corruption_sigma: f64,
    /// Fraction of windows held out for validation, in [0, 1).
    pub validation_fraction: f64,
    /// Stop early after this many epochs without validation improvement.
    pub early_stop_patience: Option<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            batch_size: 100,
            epochs: 50,
            learning_rate: 1e-3,
            corruption_sigma: 0.05,
            validation_fraction: 0.1,
            early_stop_patience: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config("learning_rate must be >= 0"));
        }
        if !(self.corruption_sigma.is_finite() && self.corruption_sigma >= 0.0) {
            return Err(Error::config("corruption_sigma must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::config("validation_fraction must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Per-epoch record of the run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub train_loss: Vec<f64>,
    /// NaN when no validation split was held out.
    pub val_loss: Vec<f64>,
    pub seconds: Vec<f64>,
}

impl TrainingHistory {
    pub fn epochs_completed(&self) -> usize {
        self.train_loss.len()
    }

    /// `epoch,train_loss,val_loss,seconds` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,seconds\n");
        for e in 0..self.epochs_completed() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e + 1,
                self.train_loss[e],
                self.val_loss[e],
                self.seconds[e]
            ));
        }
        out
    }
}

/// Adds i.i.d. zero-mean Gaussian noise of standard deviation `sigma` to
/// every element. `sigma = 0` returns the window unchanged; origin and
/// label are always preserved.
pub fn corrupt_sequence(w: &Window, sigma: f64, seed: u64) -> Result<Window> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::argument(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut out = w.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma checked finite");
    for v in out.values.data_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok(out)
}

/// One pass over `windows`: seeded shuffle, mini-batches, corrupted-input
/// gradients against the clean targets, one Adam step per batch. Returns
/// the mean per-window loss. The caller's `rng` drives both the shuffle
/// and the per-window corruption seeds, so an epoch is a pure function of
/// the rng state.
pub fn train_epoch(
    windows: &[Window],
    params: &mut ModelParams,
    adam: &mut AdamState,
    model_cfg: &ModelConfig,
    train_cfg: &TrainingConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::argument("train_epoch needs at least one window"));
    }
    train_cfg.validate()?;

    let mut order: Vec<usize> = (0..windows.len()).collect();
    order.shuffle(rng);

    let mut flat = params.to_flat();
    let mut total_loss = 0.0;

    for batch in order.chunks(train_cfg.batch_size) {
        let mut grad_acc = vec![0.0; flat.len()];
        let mut batch_loss = 0.0;
        for &idx in batch {
            let clean = &windows[idx];
            let corrupted = corrupt_sequence(clean, train_cfg.corruption_sigma, rng.next_u64())?;
            let (loss, grads) = forward_backward(&corrupted, clean, params, model_cfg)?;
            batch_loss += loss;
            for (a, b) in grad_acc.iter_mut().zip(grads.to_flat()) {
                *a += b;
            }
        }
        if !batch_loss.is_finite() {
            return Err(Error::numeric("non-finite loss in training batch"));
        }
        total_loss += batch_loss;

        let scale = 1.0 / batch.len() as f64;
        for g in &mut grad_acc {
            *g *= scale;
        }
        adam_step(&mut flat, &grad_acc, adam)?;
        params.copy_from_flat(&flat)?;
    }

    Ok(total_loss / windows.len() as f64)
}

/// Mean reconstruction loss of uncorrupted windows under the current
/// parameters. NaN for an empty slice.
pub fn validation_loss(
    windows: &[Window],
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<f64> {
    if windows.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for w in windows {
        let x_hat = forward(w, params, cfg)?;
        let (loss, _) = mse_loss(&w.values, &x_hat)?;
        total += loss;
    }
    Ok(total / windows.len() as f64)
}

/// Deterministic train/validation split: a seeded shuffle of the indices,
/// with the trailing `fraction` held out. Exposed so callers can recover
/// the exact split [`train`] used (e.g. to calibrate a threshold on the
/// validation windows).
pub fn split_validation(
    num_windows: usize,
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut indices: Vec<usize> = (0..num_windows).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let val_count = (num_windows as f64 * fraction).floor() as usize;
    let split = num_windows - val_count;
    let val = indices.split_off(split);
    (indices, val)
}

/// Full training run per the enhanced-autoencoder procedure: seeded
/// initialization, anomalous windows excluded, a held-out validation
/// split scored uncorrupted each epoch, optional early stopping.
///
/// Seed derivation: one master ChaCha stream seeded by `seed` yields the
/// init seed and the split seed, then drives every epoch's shuffling and
/// corruption.
pub fn train(
    windows: &[Window],
    model_cfg: &ModelConfig,
    train_cfg: &TrainingConfig,
    seed: u64,
) -> Result<(ModelParams, TrainingHistory)> {
    model_cfg.validate()?;
    train_cfg.validate()?;

    let normal: Vec<Window> = windows.iter().filter(|w| w.label == 0).cloned().collect();
    if normal.is_empty() {
        return Err(Error::argument(
            "no training data: every window is labeled anomalous",
        ));
    }

    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let init_seed = master.next_u64();
    let split_seed = master.next_u64();

    let (train_idx, val_idx) =
        split_validation(normal.len(), train_cfg.validation_fraction, split_seed);
    if train_idx.is_empty() {
        return Err(Error::argument(
            "validation fraction leaves no training windows",
        ));
    }
    let train_set: Vec<Window> = train_idx.iter().map(|&i| normal[i].clone()).collect();
    let val_set: Vec<Window> = val_idx.iter().map(|&i| normal[i].clone()).collect();

    let mut params = init_params(model_cfg, init_seed)?;
    let mut adam = AdamState::new(params.num_params(), train_cfg.learning_rate);
    let mut history = TrainingHistory::default();

    let mut best_val = f64::INFINITY;
    let mut epochs_since_best = 0usize;

    for _epoch in 0..train_cfg.epochs {
        let started = Instant::now();
        let train_loss = train_epoch(
            &train_set,
            &mut params,
            &mut adam,
            model_cfg,
            train_cfg,
            &mut master,
        )?;
        let val = validation_loss(&val_set, &params, model_cfg)?;
        history.train_loss.push(train_loss);
        history.val_loss.push(val);
        history.seconds.push(started.elapsed().as_secs_f64());

        if let Some(patience) = train_cfg.early_stop_patience {
            if val.is_finite() && val < best_val {
                best_val = val;
                epochs_since_best = 0;
            } else {
                epochs_since_best += 1;
                if epochs_since_best >= patience {
                    break;
                }
            }
        }
    }

    Ok((params, history))
}
