//! Command config files, TOML or JSON picked by extension.

use std::fs;
use std::path::Path;

use jamwatch_core::model::ModelConfig;
use jamwatch_core::signal::{BaselineConfig, JammerConfig};
use jamwatch_core::train::TrainingConfig;
use jamwatch_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Scenario description for `jamwatch generate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub num_samples: usize,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub baseline: BaselineConfig,
    /// Injected in order; each jammer references the signal power already
    /// present in its window.
    #[serde(default)]
    pub jammers: Vec<JammerConfig>,
}

fn default_sample_rate() -> f64 {
    1e6
}

/// Model, optimizer and calibration settings for `jamwatch train`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainFileConfig {
    pub model: ModelConfig,
    pub training: TrainingConfig,
    /// Percentile of held-out normal errors used for the threshold.
    pub threshold_percentile: f64,
    /// Windowing stride; defaults to the sequence length.
    pub stride: Option<usize>,
    pub sample_rate_hz: Option<f64>,
}

impl Default for TrainFileConfig {
    fn default() -> Self {
        TrainFileConfig {
            model: ModelConfig::default(),
            training: TrainingConfig::default(),
            threshold_percentile: 99.0,
            stride: None,
            sample_rate_hz: None,
        }
    }
}

/// Reads a TOML (`.toml`) or JSON (anything else) config file.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let is_toml = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("toml"))
        .unwrap_or(false);
    if is_toml {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use jamwatch_core::signal::JammerKind;

    #[test]
    fn toml_generate_config_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.toml");
        fs::write(
            &path,
            r#"
num_samples = 1000
sample_rate_hz = 2e6

[baseline]
snr_db = 15.0

[[jammers]]
kind = "tone"
start_index = 100
duration = 200
relative_power_db = 0.0
tone_freq_fraction = 0.1

[[jammers]]
kind = "pulsed"
start_index = 500
duration = 300
relative_power_db = 6.0
pulse_period = 50
pulse_duty = 0.5
"#,
        )
        .unwrap();
        let cfg: GenerateConfig = load_config(&path).unwrap();
        assert_eq!(cfg.num_samples, 1000);
        assert_eq!(cfg.sample_rate_hz, 2e6);
        assert_eq!(cfg.baseline.snr_db, 15.0);
        assert_eq!(cfg.baseline.samples_per_symbol, 8);
        assert_eq!(cfg.jammers.len(), 2);
        assert_eq!(cfg.jammers[0].kind, JammerKind::Tone);
        assert_eq!(cfg.jammers[1].pulse_period, Some(50));
    }

    #[test]
    fn json_train_config_parses_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.json");
        fs::write(
            &path,
            r#"{ "model": { "seq_len": 20 }, "training": { "epochs": 5 } }"#,
        )
        .unwrap();
        let cfg: TrainFileConfig = load_config(&path).unwrap();
        assert_eq!(cfg.model.seq_len, 20);
        assert_eq!(cfg.model.encoder_units, vec![50, 25]);
        assert_eq!(cfg.training.epochs, 5);
        assert_eq!(cfg.training.batch_size, 100);
        assert_eq!(cfg.threshold_percentile, 99.0);
    }

    #[test]
    fn malformed_config_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        fs::write(&path, "num_samples = \"not a number\"").unwrap();
        assert!(matches!(
            load_config::<GenerateConfig>(&path).unwrap_err(),
            Error::Config(_)
        ));
    }

    #[test]
    fn missing_config_is_config_error() {
        assert!(matches!(
            load_config::<GenerateConfig>(Path::new("/nonexistent/x.toml")).unwrap_err(),
            Error::Config(_)
        ));
    }
}
