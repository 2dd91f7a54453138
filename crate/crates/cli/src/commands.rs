//! The five pipeline stages behind the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use jamwatch_core::detect::{calibrate_threshold, detect_stream, evaluate, Threshold};
use jamwatch_core::iqfile::{label_sidecar_path, read_iq, write_iq};
use jamwatch_core::model::{forward, load_params, save_params, Checkpoint};
use jamwatch_core::signal::{generate_baseline_with, inject_jammer};
use jamwatch_core::train::{split_validation, train};
use jamwatch_core::window::{denormalize_values, fit_normalizer, normalize, window_stream, Window};
use jamwatch_core::{Error, Result};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{load_config, GenerateConfig, TrainFileConfig};
use crate::manifest::RunManifest;
use crate::plot;
use crate::report::{OverlayBlock, ReportFile};

pub struct Ctx {
    pub quiet: bool,
}

impl Ctx {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("[jamwatch] {}", msg.as_ref());
        }
    }
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn to_json_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

/// `generate`: synthesize a labeled capture per the scenario config.
pub fn cmd_generate(ctx: &Ctx, config_path: &Path, out: &Path, seed: u64) -> Result<()> {
    let cfg: GenerateConfig = load_config(config_path)?;
    ensure_out_dir(out)?;

    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let baseline_seed = master.next_u64();
    let mut stream = generate_baseline_with(
        cfg.num_samples,
        cfg.sample_rate_hz,
        baseline_seed,
        &cfg.baseline,
    )?;
    for jammer in &cfg.jammers {
        let jam_seed = master.next_u64();
        stream = inject_jammer(&stream, jammer, jam_seed)?;
    }

    let iq_path = out.join("capture.iq");
    write_iq(&stream, &iq_path)?;
    let labels_path = label_sidecar_path(&iq_path);
    let jammed = stream
        .labels
        .as_ref()
        .map(|l| l.iter().filter(|&&b| b == 1).count())
        .unwrap_or(0);
    ctx.info(format!(
        "wrote {} samples ({} jammed) to {}",
        stream.len(),
        jammed,
        iq_path.display()
    ));

    RunManifest::new("generate", Some(seed), to_json_value(&cfg))
        .with_inputs(&[config_path])
        .with_outputs(&[&iq_path, &labels_path])
        .write(out)?;
    Ok(())
}

/// `train`: window the capture, keep normal windows, fit normalization,
/// run the training loop, calibrate the threshold on the validation
/// split, and write every artifact.
pub fn cmd_train(
    ctx: &Ctx,
    data_path: &Path,
    config_path: &Path,
    out: &Path,
    seed: u64,
    sample_rate_flag: Option<f64>,
) -> Result<()> {
    let cfg: TrainFileConfig = load_config(config_path)?;
    cfg.model.validate()?;
    cfg.training.validate()?;
    ensure_out_dir(out)?;

    let sample_rate = sample_rate_flag.or(cfg.sample_rate_hz).unwrap_or(1e6);
    let stream = read_iq(data_path, sample_rate)?;
    let stride = cfg.stride.unwrap_or(cfg.model.seq_len);
    let windows = window_stream(&stream, cfg.model.seq_len, stride)?;
    let normal: Vec<Window> = windows.into_iter().filter(|w| w.label == 0).collect();
    if normal.is_empty() {
        return Err(Error::Argument(
            "no training data: capture has no normal windows".into(),
        ));
    }
    ctx.info(format!(
        "training on {} normal windows (seq_len {}, stride {stride})",
        normal.len(),
        cfg.model.seq_len
    ));

    let stats = fit_normalizer(&normal)?;
    let normed = normalize(&normal, &stats);
    let (params, history) = train(&normed, &cfg.model, &cfg.training, seed)?;
    ctx.info(format!(
        "finished {} epochs, final train loss {:.6}",
        history.epochs_completed(),
        history.train_loss.last().unwrap()
    ));

    // Threshold from reconstruction errors of the held-out normal windows
    // (the training split itself when no validation was held out),
    // recovered through the same seed derivation train() uses.
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let _init_seed = master.next_u64();
    let split_seed = master.next_u64();
    let (train_idx, val_idx) =
        split_validation(normed.len(), cfg.training.validation_fraction, split_seed);
    let calib_idx = if val_idx.is_empty() { &train_idx } else { &val_idx };
    let mut errors = Vec::with_capacity(calib_idx.len());
    for &k in calib_idx {
        let w = &normed[k];
        let x_hat = forward(w, &params, &cfg.model)?;
        let (err, _) = jamwatch_core::nn::mse_loss(&w.values, &x_hat)?;
        errors.push(err);
    }
    let threshold = calibrate_threshold(&errors, cfg.threshold_percentile)?;
    ctx.info(format!(
        "threshold {:.6} at p{} over {} windows",
        threshold.value, threshold.percentile, threshold.calibration_count
    ));

    let ckpt_path = out.join("model.ckpt");
    save_params(
        &Checkpoint {
            config: cfg.model.clone(),
            params,
            norm: Some(stats.clone()),
        },
        &ckpt_path,
    )?;
    let norm_path = out.join("norm.json");
    fs::write(
        &norm_path,
        serde_json::to_string_pretty(&stats)
            .map_err(|e| Error::Format(format!("norm encode: {e}")))?
            + "\n",
    )?;
    let threshold_path = out.join("threshold.json");
    fs::write(
        &threshold_path,
        serde_json::to_string_pretty(&threshold)
            .map_err(|e| Error::Format(format!("threshold encode: {e}")))?
            + "\n",
    )?;
    let history_path = out.join("history.csv");
    fs::write(&history_path, history.to_csv())?;

    RunManifest::new("train", Some(seed), to_json_value(&cfg))
        .with_inputs(&[data_path, config_path])
        .with_outputs(&[&ckpt_path, &norm_path, &threshold_path, &history_path])
        .write(out)?;
    Ok(())
}

fn parse_threshold(spec: &str) -> Result<Threshold> {
    if let Ok(value) = spec.parse::<f64>() {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::Argument(format!(
                "threshold value {value} must be finite and nonnegative"
            )));
        }
        return Ok(Threshold {
            value,
            percentile: f64::NAN,
            calibration_count: 0,
        });
    }
    let text = fs::read_to_string(spec)
        .map_err(|e| Error::Config(format!("threshold {spec}: {e}")))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("threshold {spec}: not a threshold file: {e}")))
}

/// `detect`: score a capture with a trained checkpoint and write the
/// report plus the per-window CSV.
#[allow(clippy::too_many_arguments)]
pub fn cmd_detect(
    ctx: &Ctx,
    data_path: &Path,
    ckpt_path: &Path,
    threshold_spec: &str,
    out: &Path,
    stride_flag: Option<usize>,
    overlay_window: Option<usize>,
    sample_rate: f64,
) -> Result<()> {
    let ckpt = load_params(ckpt_path)?;
    let norm = ckpt.norm.clone().ok_or_else(|| {
        Error::Config(format!(
            "{}: checkpoint carries no normalization stats",
            ckpt_path.display()
        ))
    })?;
    let threshold = parse_threshold(threshold_spec)?;
    let stream = read_iq(data_path, sample_rate)?;
    let stride = stride_flag.unwrap_or(ckpt.config.seq_len);

    let report = detect_stream(
        &stream,
        &ckpt.params,
        &ckpt.config,
        &norm,
        &threshold,
        stride,
    )?;
    let flagged = report.decisions.iter().filter(|&&d| d == 1).count();
    ctx.info(format!(
        "{} of {} windows above threshold {:.6}",
        flagged,
        report.decisions.len(),
        threshold.value
    ));
    if let Some(m) = &report.metrics {
        ctx.info(format!(
            "AUC {:.4}, precision {:.4}, recall {:.4}, F1 {:.4}",
            m.auc, m.precision, m.recall, m.f1
        ));
    }

    // Capture one window for overlay plots: the requested index, or the
    // first normal-decision window.
    let windows = window_stream(&stream, ckpt.config.seq_len, stride)?;
    let pick = overlay_window.unwrap_or_else(|| {
        report
            .decisions
            .iter()
            .position(|&d| d == 0)
            .unwrap_or(0)
    });
    let overlay = if pick < windows.len() {
        let raw = &windows[pick];
        let normed = normalize(std::slice::from_ref(raw), &norm);
        let x_hat = forward(&normed[0], &ckpt.params, &ckpt.config)?;
        let recon = denormalize_values(&x_hat, &norm);
        let t = ckpt.config.seq_len;
        let n = ckpt.config.input_dim;
        Some(OverlayBlock {
            window_index: pick,
            origin_index: raw.origin_index,
            seq_len: t,
            feature_dim: n,
            original: (0..t).map(|k| raw.values.row(k).to_vec()).collect(),
            reconstructed: (0..t).map(|k| recon.row(k).to_vec()).collect(),
        })
    } else {
        return Err(Error::Argument(format!(
            "overlay window {pick} out of range ({} windows)",
            windows.len()
        )));
    };

    ensure_out_dir(out)?;
    let report_path = out.join("report.json");
    let csv_path = out.join("windows.csv");
    fs::write(&csv_path, report.to_csv())?;
    ReportFile::new(report, overlay).write(&report_path)?;

    let cfg_snapshot = serde_json::json!({
        "checkpoint": ckpt_path.display().to_string(),
        "threshold": threshold_spec,
        "stride": stride,
        "sample_rate_hz": sample_rate,
    });
    RunManifest::new("detect", None, cfg_snapshot)
        .with_inputs(&[data_path, ckpt_path])
        .with_outputs(&[&report_path, &csv_path])
        .write(out)?;
    Ok(())
}

/// `evaluate`: print the metrics table of a labeled report.
pub fn cmd_evaluate(report_path: &Path) -> Result<()> {
    let rf = ReportFile::read(report_path)?;
    let metrics = evaluate(&rf.report)?;
    let t = &rf.report.threshold;
    println!("windows     {}", rf.report.series.errors.len());
    println!(
        "threshold   {:.6} (p{}, calibrated on {})",
        t.value, t.percentile, t.calibration_count
    );
    println!("AUC         {:.4}", metrics.auc);
    println!("precision   {:.4}", metrics.precision);
    println!("recall      {:.4}", metrics.recall);
    println!("F1          {:.4}", metrics.f1);
    println!(
        "confusion   TP {} / FP {} / TN {} / FN {}",
        metrics.true_positives,
        metrics.false_positives,
        metrics.true_negatives,
        metrics.false_negatives
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    ErrorTrace,
    Histogram,
    Overlay,
}

impl PlotKind {
    fn stem(self) -> &'static str {
        match self {
            PlotKind::ErrorTrace => "error_trace",
            PlotKind::Histogram => "histogram",
            PlotKind::Overlay => "overlay",
        }
    }
}

/// `plot`: emit the CSV + SVG pair for one plot kind.
pub fn cmd_plot(ctx: &Ctx, report_path: &Path, kind: PlotKind, out: &Path) -> Result<()> {
    let rf = ReportFile::read(report_path)?;
    let (csv, svg) = match kind {
        PlotKind::ErrorTrace => plot::error_trace(&rf)?,
        PlotKind::Histogram => plot::histogram(&rf, 40)?,
        PlotKind::Overlay => plot::overlay(&rf)?,
    };
    ensure_out_dir(out)?;
    let csv_path: PathBuf = out.join(format!("{}.csv", kind.stem()));
    let svg_path: PathBuf = out.join(format!("{}.svg", kind.stem()));
    fs::write(&csv_path, csv)?;
    fs::write(&svg_path, svg)?;
    ctx.info(format!(
        "wrote {} and {}",
        csv_path.display(),
        svg_path.display()
    ));

    let cfg_snapshot = serde_json::json!({
        "report": report_path.display().to_string(),
        "kind": kind.stem(),
    });
    RunManifest::new("plot", None, cfg_snapshot)
        .with_inputs(&[report_path])
        .with_outputs(&[&csv_path, &svg_path])
        .write(out)?;
    Ok(())
}
