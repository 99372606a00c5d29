//! Mono RIFF/WAVE input and output (PCM16 or float32).

use std::path::Path;

use crate::error::{AncError, Result};
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavEncoding {
    Pcm16,
    #[default]
    Float32,
}

/// What happened while writing a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WavWriteReport {
    /// Samples with `|x| > 1` that were saturated (PCM16 only).
    pub clipped: usize,
}

fn write_err(path: &Path, e: hound::Error) -> AncError {
    match e {
        hound::Error::IoError(io) => AncError::io(path, io),
        other => AncError::Format(format!("{}: {other}", path.display())),
    }
}

/// Reads the first channel of a PCM16 or float32 file, scaled to [−1, 1].
pub fn read_wav(path: &Path) -> Result<Signal> {
    let file = std::fs::File::open(path).map_err(|e| AncError::io(path, e))?;
    // Past this point any read failure means a malformed or short file.
    let bad = |e: hound::Error| AncError::Format(format!("{}: {e}", path.display()));
    let mut reader = hound::WavReader::new(std::io::BufReader::new(file)).map_err(bad)?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .step_by(channels)
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(bad)?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .step_by(channels)
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(bad)?,
        (fmt, bits) => {
            return Err(AncError::Format(format!(
                "{}: unsupported encoding {fmt:?} {bits}-bit",
                path.display()
            )))
        }
    };
    let expected = reader.duration() as usize;
    if samples.len() != expected {
        return Err(AncError::Format(format!(
            "{}: truncated data chunk ({} of {expected} frames)",
            path.display(),
            samples.len()
        )));
    }
    Signal::new(samples, spec.sample_rate as f64).map_err(|e| AncError::Format(format!("{}: {e}", path.display())))
}

pub fn write_wav(signal: &Signal, path: &Path, encoding: WavEncoding) -> Result<WavWriteReport> {
    if signal.sample_rate.fract() != 0.0 || signal.sample_rate > u32::MAX as f64 {
        return Err(AncError::Domain(format!("WAV needs an integer sample rate, got {}", signal.sample_rate)));
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate as u32,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| write_err(path, e))?;
    let mut report = WavWriteReport::default();
    for &v in &signal.samples {
        match encoding {
            WavEncoding::Pcm16 => {
                if v.abs() > 1.0 {
                    report.clipped += 1;
                }
                let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                writer.write_sample(q).map_err(|e| write_err(path, e))?;
            }
            WavEncoding::Float32 => writer.write_sample(v as f32).map_err(|e| write_err(path, e))?,
        }
    }
    writer.finalize().map_err(|e| write_err(path, e))?;
    if report.clipped > 0 {
        log::warn!("{}: {} samples clipped to PCM16 range", path.display(), report.clipped);
    }
    Ok(report)
}
