//! Static plot emission: each kind writes a CSV of the plotted data and a
//! self-contained SVG.

use std::fmt::Write as _;

use jamwatch_core::{Error, Result};

use crate::report::ReportFile;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 460.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        let pad = |lo: f64, hi: f64| {
            if (hi - lo).abs() < 1e-300 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x_min, x_max) = pad(x_min, x_max);
        let (y_min, y_max) = pad(y_min, y_max);
        Frame {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN_L + (v - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_B
            - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn svg_open(title: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{title}</text>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        tx = WIDTH / 2.0,
        title = title
    )
}

fn svg_axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    let _ = writeln!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>"
    );
    for k in 0..=5 {
        let frac = k as f64 / 5.0;
        let xv = f.x_min + frac * (f.x_max - f.x_min);
        let yv = f.y_min + frac * (f.y_max - f.y_min);
        let xp = f.x(xv);
        let yp = f.y(yv);
        let _ = writeln!(
            out,
            "<line x1=\"{xp}\" y1=\"{y0}\" x2=\"{xp}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{xp}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            y0 + 5.0,
            y0 + 20.0,
            format_tick(xv)
        );
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{yp}\" x2=\"{x0}\" y2=\"{yp}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
            x0 - 5.0,
            x0 - 8.0,
            yp + 4.0,
            format_tick(yv)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0
    );
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if a >= 1000.0 || a < 0.01 {
        format!("{v:.2e}")
    } else if a >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn svg_polyline(out: &mut String, f: &Frame, points: &[(f64, f64)], color: &str, dashed: bool) {
    let mut path = String::new();
    for (x, y) in points {
        let _ = write!(path, "{:.2},{:.2} ", f.x(*x), f.y(*y));
    }
    let dash = if dashed { " stroke-dasharray=\"6 4\"" } else { "" };
    let _ = writeln!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.4\"{dash}/>",
        path.trim_end()
    );
}

fn svg_legend(out: &mut String, entries: &[(&str, &str, bool)]) {
    let mut x = MARGIN_L + 10.0;
    for (label, color, dashed) in entries {
        let dash = if *dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        let _ = writeln!(
            out,
            "<line x1=\"{x}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{color}\" stroke-width=\"2\"{dash}/>\n\
             <text x=\"{}\" y=\"{}\">{label}</text>",
            x + 26.0,
            x + 31.0,
            MARGIN_T + 16.0,
            y = MARGIN_T + 12.0,
        );
        x += 30.0 + 9.0 * label.len() as f64 + 20.0;
    }
}

/// Per-window error trace with the constant threshold line.
pub fn error_trace(rf: &ReportFile) -> Result<(String, String)> {
    let errors = &rf.report.series.errors;
    let t = rf.report.threshold.value;

    let mut csv = String::from(if rf.report.series.labels.is_some() {
        "window,origin,error,threshold,label\n"
    } else {
        "window,origin,error,threshold\n"
    });
    for (k, &e) in errors.iter().enumerate() {
        let origin = rf.report.series.origins[k];
        match &rf.report.series.labels {
            Some(labels) => {
                let _ = writeln!(csv, "{k},{origin},{e},{t},{}", labels[k]);
            }
            None => {
                let _ = writeln!(csv, "{k},{origin},{e},{t}");
            }
        }
    }

    let y_max = errors.iter().cloned().fold(t, f64::max) * 1.05;
    let f = Frame::new(0.0, (errors.len().max(2) - 1) as f64, 0.0, y_max);
    let mut svg = svg_open("Reconstruction error per window");
    svg_axes(&mut svg, &f, "window index", "reconstruction error");
    let pts: Vec<(f64, f64)> = errors.iter().enumerate().map(|(k, &e)| (k as f64, e)).collect();
    svg_polyline(&mut svg, &f, &pts, "#1f77b4", false);
    svg_polyline(
        &mut svg,
        &f,
        &[(0.0, t), ((errors.len().max(2) - 1) as f64, t)],
        "#d62728",
        true,
    );
    svg_legend(&mut svg, &[("error", "#1f77b4", false), ("threshold", "#d62728", true)]);
    svg.push_str("</svg>\n");
    Ok((csv, svg))
}

/// Histogram of reconstruction errors with the threshold marker.
pub fn histogram(rf: &ReportFile, bins: usize) -> Result<(String, String)> {
    let errors = &rf.report.series.errors;
    if errors.is_empty() {
        return Err(Error::Argument("report has no windows to bin".into()));
    }
    let bins = bins.max(1);
    let lo = errors.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = errors.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &e in errors {
        let mut idx = ((e - lo) / width) as usize;
        if idx >= bins {
            idx = bins - 1;
        }
        counts[idx] += 1;
    }

    let mut csv = String::from("bin_lo,bin_hi,count\n");
    for (k, &c) in counts.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{c}",
            lo + k as f64 * width,
            lo + (k + 1) as f64 * width
        );
    }

    let t = rf.report.threshold.value;
    let y_max = *counts.iter().max().unwrap() as f64 * 1.08;
    let f = Frame::new(lo.min(t), (lo + bins as f64 * width).max(t), 0.0, y_max);
    let mut svg = svg_open("Reconstruction error distribution");
    svg_axes(&mut svg, &f, "reconstruction error", "window count");
    for (k, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let x0 = f.x(lo + k as f64 * width);
        let x1 = f.x(lo + (k + 1) as f64 * width);
        let y = f.y(c as f64);
        let _ = writeln!(
            svg,
            "<rect x=\"{x0:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
             fill=\"#1f77b4\" fill-opacity=\"0.7\" stroke=\"#11507e\"/>",
            (x1 - x0).max(0.5),
            HEIGHT - MARGIN_B - y
        );
    }
    let _ = writeln!(
        svg,
        "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"#d62728\" \
         stroke-width=\"1.6\" stroke-dasharray=\"6 4\"/>",
        HEIGHT - MARGIN_B,
        MARGIN_T,
        x = f.x(t)
    );
    svg_legend(&mut svg, &[("threshold", "#d62728", true)]);
    svg.push_str("</svg>\n");
    Ok((csv, svg))
}

/// Original vs reconstructed traces for the window captured at detect
/// time. CSV columns: `t`, the original features, the reconstructed ones.
pub fn overlay(rf: &ReportFile) -> Result<(String, String)> {
    let block = rf.overlay.as_ref().ok_or_else(|| {
        Error::Argument("report has no overlay block; rerun detect to capture one".into())
    })?;
    let n = block.feature_dim;
    let names: Vec<String> = if n == 2 {
        vec!["i".into(), "q".into()]
    } else {
        (0..n).map(|k| format!("f{k}")).collect()
    };

    let mut csv = String::from("t");
    for name in &names {
        let _ = write!(csv, ",{name}_original");
    }
    for name in &names {
        let _ = write!(csv, ",{name}_reconstructed");
    }
    csv.push('\n');
    for t in 0..block.seq_len {
        let _ = write!(csv, "{t}");
        for v in &block.original[t] {
            let _ = write!(csv, ",{v}");
        }
        for v in &block.reconstructed[t] {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
    }

    let all: Vec<f64> = block
        .original
        .iter()
        .chain(block.reconstructed.iter())
        .flatten()
        .copied()
        .collect();
    let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let f = Frame::new(0.0, (block.seq_len.max(2) - 1) as f64, lo, hi);

    let mut svg = svg_open(&format!(
        "Original vs reconstructed window (origin {})",
        block.origin_index
    ));
    svg_axes(&mut svg, &f, "time step", "amplitude");
    let colors = ["#1f77b4", "#2ca02c", "#9467bd", "#8c564b"];
    let mut legend: Vec<(String, &str, bool)> = Vec::new();
    for j in 0..n {
        let color = colors[j % colors.len()];
        let orig: Vec<(f64, f64)> = (0..block.seq_len)
            .map(|t| (t as f64, block.original[t][j]))
            .collect();
        let recon: Vec<(f64, f64)> = (0..block.seq_len)
            .map(|t| (t as f64, block.reconstructed[t][j]))
            .collect();
        svg_polyline(&mut svg, &f, &orig, color, false);
        svg_polyline(&mut svg, &f, &recon, color, true);
        legend.push((format!("{} original", names[j]), color, false));
        legend.push((format!("{} reconstructed", names[j]), color, true));
    }
    let legend_refs: Vec<(&str, &str, bool)> = legend
        .iter()
        .map(|(l, c, d)| (l.as_str(), *c, *d))
        .collect();
    svg_legend(&mut svg, &legend_refs);
    svg.push_str("</svg>\n");
    Ok((csv, svg))
}
