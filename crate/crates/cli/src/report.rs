//! The on-disk detection report: the core anomaly report plus an optional
//! original-vs-reconstructed capture of one window for overlay plots.

use std::fs;
use std::path::Path;

use jamwatch_core::detect::AnomalyReport;
use jamwatch_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlayBlock {
    /// Index of the captured window within the report.
    pub window_index: usize,
    pub origin_index: usize,
    pub seq_len: usize,
    pub feature_dim: usize,
    /// Raw window values, `seq_len` rows of `feature_dim`.
    pub original: Vec<Vec<f64>>,
    /// Reconstruction mapped back to raw units, same shape.
    pub reconstructed: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool_version: String,
    pub report: AnomalyReport,
    pub overlay: Option<OverlayBlock>,
}

impl ReportFile {
    pub fn new(report: AnomalyReport, overlay: Option<OverlayBlock>) -> Self {
        ReportFile {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            report,
            overlay,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("report encode: {e}")))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: not a report file: {e}", path.display())))
    }
}
