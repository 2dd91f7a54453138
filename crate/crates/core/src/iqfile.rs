//! Raw I/Q file I/O: little-endian interleaved 32-bit float pairs, the
//! de facto SDR capture format, with an optional one-byte-per-sample label
//! sidecar at `<path>.labels`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::signal::{IqSample, IqStream};

/// Sidecar path convention for ground-truth labels.
pub fn label_sidecar_path(iq_path: &Path) -> PathBuf {
    let mut os = iq_path.as_os_str().to_os_string();
    os.push(".labels");
    PathBuf::from(os)
}

/// Writes samples as interleaved `f32` little-endian pairs. When the
/// stream carries labels, a sidecar file is written next to it.
pub fn write_iq(stream: &IqStream, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(stream.len() * 8);
    for s in &stream.samples {
        bytes.extend_from_slice(&(s.i as f32).to_le_bytes());
        bytes.extend_from_slice(&(s.q as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    if let Some(labels) = &stream.labels {
        fs::write(label_sidecar_path(path), labels)?;
    }
    Ok(())
}

/// Reads an I/Q file and, when present, its label sidecar. The raw format
/// has no rate metadata, so the caller supplies `sample_rate_hz`.
pub fn read_iq(path: &Path, sample_rate_hz: f64) -> Result<IqStream> {
    let bytes = fs::read(path)?;
    if bytes.is_empty() {
        return Err(Error::format(format!("{}: empty I/Q file", path.display())));
    }
    if bytes.len() % 8 != 0 {
        return Err(Error::format(format!(
            "{}: length {} is not a multiple of 8 (interleaved f32 pairs)",
            path.display(),
            bytes.len()
        )));
    }
    let samples: Vec<IqSample> = bytes
        .chunks_exact(8)
        .map(|chunk| {
            let i = f32::from_le_bytes(chunk[0..4].try_into().unwrap());
            let q = f32::from_le_bytes(chunk[4..8].try_into().unwrap());
            IqSample::new(i as f64, q as f64)
        })
        .collect();

    let sidecar = label_sidecar_path(path);
    let labels = if sidecar.exists() {
        let l = fs::read(&sidecar)?;
        if l.len() != samples.len() {
            return Err(Error::format(format!(
                "{}: {} labels for {} samples",
                sidecar.display(),
                l.len(),
                samples.len()
            )));
        }
        if let Some(bad) = l.iter().find(|&&b| b > 1) {
            return Err(Error::format(format!(
                "{}: label byte {bad} is not 0 or 1",
                sidecar.display()
            )));
        }
        Some(l)
    } else {
        None
    };

    IqStream::new(samples, sample_rate_hz, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::generate_baseline;

    #[test]
    fn round_trip_preserves_f32_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("capture.iq");
        let stream = generate_baseline(500, 1e6, 17).unwrap();
        write_iq(&stream, &path).unwrap();

        let meta = std::fs::metadata(&path).unwrap();
        assert_eq!(meta.len(), 500 * 8);

        let back = read_iq(&path, 1e6).unwrap();
        assert_eq!(back.len(), 500);
        assert_eq!(back.labels, stream.labels);
        for (a, b) in back.samples.iter().zip(&stream.samples) {
            assert_eq!(a.i, b.i as f32 as f64);
            assert_eq!(a.q, b.q as f32 as f64);
        }
    }

    #[test]
    fn truncated_file_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.iq");
        std::fs::write(&path, [0u8; 13]).unwrap();
        assert!(matches!(
            read_iq(&path, 1e6).unwrap_err(),
            Error::Format(_)
        ));
    }

    #[test]
    fn mismatched_sidecar_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("capture.iq");
        let stream = generate_baseline(10, 1e6, 1).unwrap();
        write_iq(&stream, &path).unwrap();
        std::fs::write(label_sidecar_path(&path), [0u8; 3]).unwrap();
        assert!(matches!(
            read_iq(&path, 1e6).unwrap_err(),
            Error::Format(_)
        ));
    }
}
