//! Slicing streams into fixed-length feature windows and standardizing
//! them for the model. Features are the raw `[i, q]` pair per sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::signal::IqStream;

/// A `T x n` slice of consecutive feature vectors, plus where it came from
/// and whether any covered sample was jammed.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// `seq_len x feature_dim` values.
    pub values: Matrix,
    /// Stream offset of the first covered sample.
    pub origin_index: usize,
    /// 1 if any covered sample carries a jam label.
    pub label: u8,
}

impl Window {
    pub fn seq_len(&self) -> usize {
        self.values.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.values.cols()
    }
}

/// Per-feature standardization statistics. Population standard deviation,
/// floored so division is always safe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-8;

/// Cuts `floor((N - seq_len) / stride) + 1` windows; window `k` starts at
/// `k * stride`. A window is labeled anomalous iff any covered sample is.
pub fn window_stream(stream: &IqStream, seq_len: usize, stride: usize) -> Result<Vec<Window>> {
    if seq_len == 0 || stride == 0 {
        return Err(Error::argument("seq_len and stride must be >= 1"));
    }
    let n = stream.len();
    if n < seq_len {
        return Err(Error::argument(format!(
            "stream length {n} shorter than seq_len {seq_len}"
        )));
    }
    let count = (n - seq_len) / stride + 1;
    let mut windows = Vec::with_capacity(count);
    for k in 0..count {
        let start = k * stride;
        let mut values = Matrix::zeros(seq_len, 2);
        let mut label = 0u8;
        for (t, s) in stream.samples[start..start + seq_len].iter().enumerate() {
            values.set(t, 0, s.i);
            values.set(t, 1, s.q);
        }
        if let Some(labels) = &stream.labels {
            if labels[start..start + seq_len].iter().any(|&l| l != 0) {
                label = 1;
            }
        }
        windows.push(Window {
            values,
            origin_index: start,
            label,
        });
    }
    Ok(windows)
}

/// Per-feature mean and population standard deviation over every element
/// of every window, std floored at [`STD_FLOOR`].
pub fn fit_normalizer(windows: &[Window]) -> Result<NormStats> {
    let first = windows
        .first()
        .ok_or_else(|| Error::argument("cannot fit normalizer on zero windows"))?;
    let dim = first.feature_dim();
    let mut mean = vec![0.0; dim];
    let mut count = 0usize;
    for w in windows {
        for t in 0..w.seq_len() {
            for (m, &v) in mean.iter_mut().zip(w.values.row(t)) {
                *m += v;
            }
        }
        count += w.seq_len();
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let mut var = vec![0.0; dim];
    for w in windows {
        for t in 0..w.seq_len() {
            for (j, &v) in w.values.row(t).iter().enumerate() {
                let d = v - mean[j];
                var[j] += d * d;
            }
        }
    }
    let std = var
        .iter()
        .map(|&v| (v / count as f64).sqrt().max(STD_FLOOR))
        .collect();
    Ok(NormStats { mean, std })
}

/// Elementwise `(x - mean) / std`. Labels and origins are preserved.
pub fn normalize(windows: &[Window], stats: &NormStats) -> Vec<Window> {
    windows
        .iter()
        .map(|w| {
            let mut values = w.values.clone();
            for t in 0..values.rows() {
                for (j, v) in values.row_mut(t).iter_mut().enumerate() {
                    *v = (*v - stats.mean[j]) / stats.std[j];
                }
            }
            Window {
                values,
                origin_index: w.origin_index,
                label: w.label,
            }
        })
        .collect()
}

/// Inverse of [`normalize`] on a single value matrix.
pub fn denormalize_values(values: &Matrix, stats: &NormStats) -> Matrix {
    let mut out = values.clone();
    for t in 0..out.rows() {
        for (j, v) in out.row_mut(t).iter_mut().enumerate() {
            *v = *v * stats.std[j] + stats.mean[j];
        }
    }
    out
}
