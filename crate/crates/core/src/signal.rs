//! Synthetic labeled I/Q traffic: a QPSK baseband with root-raised-cosine
//! pulse shaping and additive white Gaussian noise stands in for captured
//! downlink data, and three jammer waveforms (tone, wideband noise, pulsed
//! noise bursts) can be injected at a configurable power relative to the
//! signal.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One complex baseband sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IqSample {
    pub i: f64,
    pub q: f64,
}

impl IqSample {
    pub fn new(i: f64, q: f64) -> Self {
        IqSample { i, q }
    }

    pub fn power(&self) -> f64 {
        self.i * self.i + self.q * self.q
    }
}

/// A finite I/Q capture with optional per-sample ground truth
/// (1 = jammed).
#[derive(Debug, Clone, PartialEq)]
pub struct IqStream {
    pub samples: Vec<IqSample>,
    pub sample_rate_hz: f64,
    pub labels: Option<Vec<u8>>,
}

impl IqStream {
    pub fn new(samples: Vec<IqSample>, sample_rate_hz: f64, labels: Option<Vec<u8>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::argument("stream must contain at least one sample"));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::argument(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(l) = &labels {
            if l.len() != samples.len() {
                return Err(Error::argument(format!(
                    "labels length {} != samples length {}",
                    l.len(),
                    samples.len()
                )));
            }
        }
        if samples.iter().any(|s| !(s.i.is_finite() && s.q.is_finite())) {
            return Err(Error::argument("samples must be finite"));
        }
        Ok(IqStream {
            samples,
            sample_rate_hz,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of `i^2 + q^2` over the given range.
    pub fn mean_power(&self, range: std::ops::Range<usize>) -> f64 {
        let n = range.len().max(1) as f64;
        self.samples[range].iter().map(IqSample::power).sum::<f64>() / n
    }
}

/// Jammer waveform family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JammerKind {
    /// Continuous complex exponential at a fixed frequency offset.
    Tone,
    /// Band-filling complex Gaussian noise.
    WidebandNoise,
    /// Noise bursts gated by a periodic on/off pattern.
    Pulsed,
}

/// Placement and shape of one injected jammer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JammerConfig {
    pub kind: JammerKind,
    pub start_index: usize,
    pub duration: usize,
    /// Jammer power relative to the signal power inside the jam window, dB.
    pub relative_power_db: f64,
    /// Tone frequency as a fraction of the sample rate, in (-0.5, 0.5).
    #[serde(default)]
    pub tone_freq_fraction: Option<f64>,
    /// Pulse repetition period in samples.
    #[serde(default)]
    pub pulse_period: Option<usize>,
    /// Fraction of each period the jammer is on, in (0, 1].
    #[serde(default)]
    pub pulse_duty: Option<f64>,
}

impl JammerConfig {
    pub fn tone(start_index: usize, duration: usize, relative_power_db: f64, freq_fraction: f64) -> Self {
        JammerConfig {
            kind: JammerKind::Tone,
            start_index,
            duration,
            relative_power_db,
            tone_freq_fraction: Some(freq_fraction),
            pulse_period: None,
            pulse_duty: None,
        }
    }

    pub fn wideband(start_index: usize, duration: usize, relative_power_db: f64) -> Self {
        JammerConfig {
            kind: JammerKind::WidebandNoise,
            start_index,
            duration,
            relative_power_db,
            tone_freq_fraction: None,
            pulse_period: None,
            pulse_duty: None,
        }
    }

    pub fn pulsed(
        start_index: usize,
        duration: usize,
        relative_power_db: f64,
        pulse_period: usize,
        pulse_duty: f64,
    ) -> Self {
        JammerConfig {
            kind: JammerKind::Pulsed,
            start_index,
            duration,
            relative_power_db,
            tone_freq_fraction: None,
            pulse_period: Some(pulse_period),
            pulse_duty: Some(pulse_duty),
        }
    }

    fn validate(&self, stream_len: usize) -> Result<()> {
        if self.duration == 0 {
            return Err(Error::argument("jammer duration must be >= 1"));
        }
        if self.start_index + self.duration > stream_len {
            return Err(Error::argument(format!(
                "jam window [{}, {}) exceeds stream length {stream_len}",
                self.start_index,
                self.start_index + self.duration
            )));
        }
        if !self.relative_power_db.is_finite() {
            return Err(Error::argument("relative_power_db must be finite"));
        }
        match self.kind {
            JammerKind::Tone => {
                let f = self
                    .tone_freq_fraction
                    .ok_or_else(|| Error::argument("tone jammer needs tone_freq_fraction"))?;
                if !(f > -0.5 && f < 0.5) {
                    return Err(Error::argument(format!(
                        "tone_freq_fraction {f} outside (-0.5, 0.5)"
                    )));
                }
            }
            JammerKind::WidebandNoise => {}
            JammerKind::Pulsed => {
                let period = self
                    .pulse_period
                    .ok_or_else(|| Error::argument("pulsed jammer needs pulse_period"))?;
                if period == 0 {
                    return Err(Error::argument("pulse_period must be >= 1"));
                }
                let duty = self
                    .pulse_duty
                    .ok_or_else(|| Error::argument("pulsed jammer needs pulse_duty"))?;
                if !(duty > 0.0 && duty <= 1.0) {
                    return Err(Error::argument(format!("pulse_duty {duty} outside (0, 1]")));
                }
            }
        }
        Ok(())
    }
}

/// Knobs of the clean-traffic generator. Defaults give a 20 dB SNR QPSK
/// baseband at 8 samples per symbol with a 0.25 roll-off filter.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub snr_db: f64,
    pub samples_per_symbol: usize,
    pub rrc_rolloff: f64,
    /// Filter span on each side, in symbols.
    pub rrc_span_symbols: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            snr_db: 20.0,
            samples_per_symbol: 8,
            rrc_rolloff: 0.25,
            rrc_span_symbols: 10,
        }
    }
}

/// Root-raised-cosine taps at `sps` samples per symbol, spanning
/// `span` symbols each side, scaled so the shaped QPSK stream has unit
/// average power (`sum h^2 = sps`).
fn rrc_taps(sps: usize, rolloff: f64, span: usize) -> Vec<f64> {
    let half = (span * sps) as isize;
    let beta = rolloff;
    let mut taps = Vec::with_capacity((2 * half + 1) as usize);
    for k in -half..=half {
        let t = k as f64 / sps as f64; // time in symbols
        let tap = if k == 0 {
            1.0 - beta + 4.0 * beta / std::f64::consts::PI
        } else if beta > 0.0 && (4.0 * beta * t).abs() == 1.0 {
            // Singularity at t = ±1/(4 beta).
            let a = (1.0 + 2.0 / std::f64::consts::PI)
                * (std::f64::consts::PI / (4.0 * beta)).sin();
            let b = (1.0 - 2.0 / std::f64::consts::PI)
                * (std::f64::consts::PI / (4.0 * beta)).cos();
            beta / 2.0_f64.sqrt() * (a + b)
        } else {
            let pi_t = std::f64::consts::PI * t;
            let num = (pi_t * (1.0 - beta)).sin() + 4.0 * beta * t * (pi_t * (1.0 + beta)).cos();
            let den = pi_t * (1.0 - (4.0 * beta * t).powi(2));
            num / den
        };
        taps.push(tap);
    }
    let energy: f64 = taps.iter().map(|h| h * h).sum();
    let scale = (sps as f64 / energy).sqrt();
    for h in &mut taps {
        *h *= scale;
    }
    taps
}

/// The noise-free shaped QPSK component of [`generate_baseline`], exposed
/// so its power can be measured directly.
pub fn generate_clean_signal(
    num_samples: usize,
    sample_rate_hz: f64,
    seed: u64,
    cfg: &BaselineConfig,
) -> Result<IqStream> {
    if num_samples == 0 {
        return Err(Error::argument("num_samples must be >= 1"));
    }
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::argument("sample rate must be positive"));
    }

    let sps = cfg.samples_per_symbol.max(1);
    let taps = rrc_taps(sps, cfg.rrc_rolloff, cfg.rrc_span_symbols.max(1));
    let half = (taps.len() - 1) / 2;

    // Enough symbols that every output sample sees a fully populated
    // filter window (no warm-up transient at the edges).
    let margin_symbols = 2 * cfg.rrc_span_symbols.max(1) + 2;
    let num_symbols = num_samples.div_ceil(sps) + 2 * margin_symbols;
    let amp = 1.0 / 2.0_f64.sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let symbols: Vec<(f64, f64)> = (0..num_symbols)
        .map(|_| {
            let bits = rng.next_u32();
            let si = if bits & 1 == 0 { amp } else { -amp };
            let sq = if bits & 2 == 0 { amp } else { -amp };
            (si, sq)
        })
        .collect();

    // Upsample + filter, evaluated directly: output sample k (relative to
    // the margin) is sum over symbols m of s_m * h[k - m*sps].
    let offset = margin_symbols * sps;
    let mut samples = Vec::with_capacity(num_samples);
    for k in 0..num_samples {
        let pos = (k + offset) as isize;
        let mut acc_i = 0.0;
        let mut acc_q = 0.0;
        // Symbols whose pulse reaches `pos`: |pos - m*sps| <= half.
        let m_lo = ((pos - half as isize).max(0) as usize).div_ceil(sps);
        let m_hi = ((pos + half as isize) as usize / sps).min(num_symbols - 1);
        for m in m_lo..=m_hi {
            let tap_idx = (pos - (m * sps) as isize + half as isize) as usize;
            if tap_idx < taps.len() {
                let h = taps[tap_idx];
                acc_i += symbols[m].0 * h;
                acc_q += symbols[m].1 * h;
            }
        }
        samples.push(IqSample::new(acc_i, acc_q));
    }

    IqStream::new(samples, sample_rate_hz, Some(vec![0u8; num_samples]))
}

/// Deterministic clean-traffic generator: seeded QPSK symbols, RRC pulse
/// shaping, white Gaussian noise at `cfg.snr_db`. All labels are 0.
pub fn generate_baseline_with(
    num_samples: usize,
    sample_rate_hz: f64,
    seed: u64,
    cfg: &BaselineConfig,
) -> Result<IqStream> {
    let mut stream = generate_clean_signal(num_samples, sample_rate_hz, seed, cfg)?;

    // Unit signal power by construction; noise power fixed by the SNR.
    let noise_power = 10.0_f64.powf(-cfg.snr_db / 10.0);
    let per_component = (noise_power / 2.0).sqrt();
    // Separate generator so the symbol stream is unaffected by noise draws.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let normal = Normal::new(0.0, per_component)
        .map_err(|e| Error::argument(format!("bad noise std: {e}")))?;
    for s in &mut stream.samples {
        s.i += normal.sample(&mut rng);
        s.q += normal.sample(&mut rng);
    }
    Ok(stream)
}

/// [`generate_baseline_with`] at the default [`BaselineConfig`].
pub fn generate_baseline(num_samples: usize, sample_rate_hz: f64, seed: u64) -> Result<IqStream> {
    generate_baseline_with(num_samples, sample_rate_hz, seed, &BaselineConfig::default())
}

/// Adds the configured jammer waveform to `stream` over its jam window and
/// sets the labels of exactly the affected samples. Samples outside the
/// window (and off-pulse samples for the pulsed kind) are untouched.
///
/// The jammer amplitude is referenced to the measured signal power inside
/// the window; a silent window falls back to unit reference power.
pub fn inject_jammer(stream: &IqStream, cfg: &JammerConfig, seed: u64) -> Result<IqStream> {
    cfg.validate(stream.len())?;
    let start = cfg.start_index;
    let end = start + cfg.duration;

    let mut reference_power = stream.mean_power(start..end);
    if reference_power <= 0.0 {
        reference_power = 1.0;
    }
    let jam_power = reference_power * 10.0_f64.powf(cfg.relative_power_db / 10.0);

    let mut out = stream.clone();
    let mut labels = out.labels.take().unwrap_or_else(|| vec![0u8; stream.len()]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    match cfg.kind {
        JammerKind::Tone => {
            let freq = cfg.tone_freq_fraction.unwrap();
            let amp = jam_power.sqrt();
            let phase0 = rng.random_range(0.0..std::f64::consts::TAU);
            for (k, s) in out.samples[start..end].iter_mut().enumerate() {
                let phase = phase0 + std::f64::consts::TAU * freq * k as f64;
                s.i += amp * phase.cos();
                s.q += amp * phase.sin();
                labels[start + k] = 1;
            }
        }
        JammerKind::WidebandNoise => {
            let normal = Normal::new(0.0, (jam_power / 2.0).sqrt())
                .map_err(|e| Error::argument(format!("bad jammer power: {e}")))?;
            for (k, s) in out.samples[start..end].iter_mut().enumerate() {
                s.i += normal.sample(&mut rng);
                s.q += normal.sample(&mut rng);
                labels[start + k] = 1;
            }
        }
        JammerKind::Pulsed => {
            let period = cfg.pulse_period.unwrap();
            let on_len = ((period as f64 * cfg.pulse_duty.unwrap()).round() as usize)
                .clamp(1, period);
            let normal = Normal::new(0.0, (jam_power / 2.0).sqrt())
                .map_err(|e| Error::argument(format!("bad jammer power: {e}")))?;
            for k in 0..cfg.duration {
                if k % period < on_len {
                    let s = &mut out.samples[start + k];
                    s.i += normal.sample(&mut rng);
                    s.q += normal.sample(&mut rng);
                    labels[start + k] = 1;
                }
            }
        }
    }

    out.labels = Some(labels);
    Ok(out)
}
