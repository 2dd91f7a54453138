//! Reconstruction-error scoring, percentile threshold calibration, the
//! binary anomaly decision, and evaluation against ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{forward, ModelConfig, ModelParams};
use crate::nn::{mse_loss, Matrix};
use crate::signal::IqStream;
use crate::window::{normalize, window_stream, NormStats, Window};

/// Per-window reconstruction errors with provenance.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub errors: Vec<f64>,
    pub origins: Vec<usize>,
    /// Ground truth per window, when the stream carried labels.
    pub labels: Option<Vec<u8>>,
}

/// A calibrated decision boundary and how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    pub percentile: f64,
    pub calibration_count: usize,
}

/// Classification quality against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
}

/// Everything detection produces for one stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub series: ErrorSeries,
    pub threshold: Threshold,
    /// 1 iff the window's error strictly exceeds the threshold.
    pub decisions: Vec<u8>,
    pub metrics: Option<Metrics>,
}

/// Reconstruction error of one window: identical formula to the training
/// loss, mean over time steps of the squared per-step residual norm.
pub fn reconstruction_error(w: &Window, x_hat: &Matrix) -> Result<f64> {
    let (loss, _) = mse_loss(&w.values, x_hat)?;
    Ok(loss)
}

/// Empirical percentile of the calibration errors, with linear
/// interpolation between order statistics. `percentile` is in (0, 100].
pub fn calibrate_threshold(errors_on_normal: &[f64], percentile: f64) -> Result<Threshold> {
    if errors_on_normal.is_empty() {
        return Err(Error::argument("cannot calibrate on zero errors"));
    }
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(Error::argument(format!(
            "percentile {percentile} outside (0, 100]"
        )));
    }
    if errors_on_normal.iter().any(|e| !e.is_finite()) {
        return Err(Error::argument("calibration errors must be finite"));
    }
    let mut sorted = errors_on_normal.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = percentile / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    let value = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    Ok(Threshold {
        value,
        percentile,
        calibration_count: errors_on_normal.len(),
    })
}

/// The anomaly indicator: 1 iff `error > threshold`, strictly.
pub fn classify(error: f64, t: &Threshold) -> u8 {
    (error > t.value) as u8
}

/// Windows a stream, normalizes with the training statistics, scores every
/// window's reconstruction, classifies against the threshold, and computes
/// metrics when ground truth is present.
pub fn detect_stream(
    stream: &IqStream,
    params: &ModelParams,
    cfg: &ModelConfig,
    norm: &NormStats,
    threshold: &Threshold,
    stride: usize,
) -> Result<AnomalyReport> {
    if norm.mean.len() != cfg.input_dim || norm.std.len() != cfg.input_dim {
        return Err(Error::config(format!(
            "normalization stats cover {} features, model expects {}",
            norm.mean.len(),
            cfg.input_dim
        )));
    }
    let windows = window_stream(stream, cfg.seq_len, stride)?;
    let normed = normalize(&windows, norm);

    let mut errors = Vec::with_capacity(normed.len());
    let mut origins = Vec::with_capacity(normed.len());
    for w in &normed {
        let x_hat = forward(w, params, cfg)?;
        errors.push(reconstruction_error(w, &x_hat)?);
        origins.push(w.origin_index);
    }
    let labels = stream
        .labels
        .as_ref()
        .map(|_| normed.iter().map(|w| w.label).collect::<Vec<u8>>());

    let decisions: Vec<u8> = errors.iter().map(|&e| classify(e, threshold)).collect();
    let series = ErrorSeries {
        errors,
        origins,
        labels,
    };
    let metrics = series
        .labels
        .as_ref()
        .map(|labels| compute_metrics(&series.errors, labels, &decisions));

    Ok(AnomalyReport {
        series,
        threshold: threshold.clone(),
        decisions,
        metrics,
    })
}

/// Rank-statistic AUC with tie-averaged ranks (the Mann-Whitney form).
/// 0.5 when either class is empty or scores carry no information.
pub fn rank_auc(errors: &[f64], labels: &[u8]) -> f64 {
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return 0.5;
    }
    let mut order: Vec<usize> = (0..errors.len()).collect();
    order.sort_by(|&a, &b| errors[a].partial_cmp(&errors[b]).unwrap());

    // Assign average ranks across ties (1-based ranks).
    let mut ranks = vec![0.0; errors.len()];
    let mut k = 0;
    while k < order.len() {
        let mut j = k;
        while j + 1 < order.len() && errors[order[j + 1]] == errors[order[k]] {
            j += 1;
        }
        let avg = (k + j) as f64 / 2.0 + 1.0;
        for &idx in &order[k..=j] {
            ranks[idx] = avg;
        }
        k = j + 1;
    }

    let rank_sum_pos: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(&l, _)| l == 1)
        .map(|(_, &r)| r)
        .sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    u / (n_pos as f64 * n_neg as f64)
}

fn compute_metrics(errors: &[f64], labels: &[u8], decisions: &[u8]) -> Metrics {
    let mut tp = 0;
    let mut fp = 0;
    let mut tn = 0;
    let mut fn_ = 0;
    for (&d, &l) in decisions.iter().zip(labels) {
        match (d, l) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 0) => tn += 1,
            (0, 1) => fn_ += 1,
            _ => unreachable!("labels and decisions are 0/1"),
        }
    }
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Metrics {
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
        precision,
        recall,
        f1,
        auc: rank_auc(errors, labels),
    }
}

/// Metrics of an existing report. Errors when it has no ground truth.
pub fn evaluate(report: &AnomalyReport) -> Result<Metrics> {
    let labels = report
        .series
        .labels
        .as_ref()
        .ok_or_else(|| Error::argument("no ground truth: report carries no labels"))?;
    Ok(compute_metrics(&report.series.errors, labels, &report.decisions))
}

impl AnomalyReport {
    /// Tabular export, one row per window:
    /// `origin,error,decision[,label]`.
    pub fn to_csv(&self) -> String {
        let labeled = self.series.labels.is_some();
        let mut out = String::from(if labeled {
            "origin,error,decision,label\n"
        } else {
            "origin,error,decision\n"
        });
        for k in 0..self.series.errors.len() {
            if labeled {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    self.series.origins[k],
                    self.series.errors[k],
                    self.decisions[k],
                    self.series.labels.as_ref().unwrap()[k]
                ));
            } else {
                out.push_str(&format!(
                    "{},{},{}\n",
                    self.series.origins[k], self.series.errors[k], self.decisions[k]
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn threshold(value: f64) -> Threshold {
        Threshold {
            value,
            percentile: 99.0,
            calibration_count: 100,
        }
    }

    #[test]
    fn error_matches_loss_formula() {
        // T=2, n=1, residuals (1, 3): (1 + 9) / 2 = 5.
        let w = Window {
            values: Matrix::from_rows(&[vec![0.0], vec![0.0]]),
            origin_index: 0,
            label: 0,
        };
        let x_hat = Matrix::from_rows(&[vec![1.0], vec![3.0]]);
        assert_eq!(reconstruction_error(&w, &x_hat).unwrap(), 5.0);

        // Quadratic in the residual: doubling residuals quadruples error.
        let x_hat2 = Matrix::from_rows(&[vec![2.0], vec![6.0]]);
        assert_eq!(reconstruction_error(&w, &x_hat2).unwrap(), 20.0);
    }

    #[test]
    fn percentile_examples() {
        let errors = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(calibrate_threshold(&errors, 100.0).unwrap().value, 5.0);
        assert_eq!(calibrate_threshold(&errors, 50.0).unwrap().value, 3.0);
        let constant = [2.5; 9];
        for p in [1.0, 37.0, 99.0, 100.0] {
            assert_eq!(calibrate_threshold(&constant, p).unwrap().value, 2.5);
        }
    }

    #[test]
    fn percentile_preconditions() {
        assert!(matches!(
            calibrate_threshold(&[], 99.0).unwrap_err(),
            Error::Argument(_)
        ));
        assert!(matches!(
            calibrate_threshold(&[1.0], 0.0).unwrap_err(),
            Error::Argument(_)
        ));
        assert!(matches!(
            calibrate_threshold(&[1.0], 100.5).unwrap_err(),
            Error::Argument(_)
        ));
    }

    #[test]
    fn classify_is_strict() {
        let t = threshold(2.0);
        assert_eq!(classify(2.0, &t), 0);
        assert_eq!(classify(2.0 + 1e-12, &t), 1);
        assert_eq!(classify(1.999, &t), 0);
    }

    #[test]
    fn auc_perfect_separation() {
        let errors = [1.0, 2.0, 3.0, 4.0];
        let labels = [0, 0, 1, 1];
        assert_eq!(rank_auc(&errors, &labels), 1.0);
    }

    #[test]
    fn auc_of_identical_scores_is_half() {
        let errors = [3.0; 6];
        let labels = [0, 1, 0, 1, 0, 1];
        assert!((rank_auc(&errors, &labels) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn four_point_hand_case() {
        let errors = vec![1.0, 2.0, 3.0, 4.0];
        let labels = vec![0u8, 0, 1, 1];
        let t = threshold(2.5);
        let decisions: Vec<u8> = errors.iter().map(|&e| classify(e, &t)).collect();
        let m = compute_metrics(&errors, &labels, &decisions);
        assert_eq!(m.auc, 1.0);
        assert_eq!(m.f1, 1.0);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 1.0);
        assert_eq!(
            m.true_positives + m.false_positives + m.true_negatives + m.false_negatives,
            4
        );
    }

    #[test]
    fn evaluate_requires_labels() {
        let report = AnomalyReport {
            series: ErrorSeries {
                errors: vec![1.0],
                origins: vec![0],
                labels: None,
            },
            threshold: threshold(1.0),
            decisions: vec![0],
            metrics: None,
        };
        assert!(matches!(
            evaluate(&report).unwrap_err(),
            Error::Argument(_)
        ));
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let errors = vec![0.1, 0.7, 0.3, 2.0, 1.1, 0.05];
        let labels = vec![0u8, 1, 0, 1, 1, 0];
        let base = rank_auc(&errors, &labels);
        let squashed: Vec<f64> = errors.iter().map(|e| (3.0 * e).tanh()).collect();
        let scaled: Vec<f64> = errors.iter().map(|e| 10.0 * e + 5.0).collect();
        assert!((rank_auc(&squashed, &labels) - base).abs() < 1e-12);
        assert!((rank_auc(&scaled, &labels) - base).abs() < 1e-12);
    }
}
