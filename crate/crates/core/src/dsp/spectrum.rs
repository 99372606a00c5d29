//! Short-time magnitude spectra for before/after inspection.

use std::io::Write;
use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{AncError, Result};
use crate::signal::Signal;

pub const SPECTROGRAM_FLOOR_DB: f64 = -100.0;

/// Frames × bins magnitude spectrogram in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramMatrix {
    pub magnitudes_db: Vec<Vec<f64>>,
    pub frame_size: usize,
    pub hop: usize,
    pub sample_rate: f64,
}

impl SpectrogramMatrix {
    pub fn bins(&self) -> usize {
        self.frame_size / 2 + 1
    }

    pub fn frames(&self) -> usize {
        self.magnitudes_db.len()
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate / self.frame_size as f64
    }

    /// CSV with a header row of bin frequencies and one row per frame.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.bins()).map(|b| format!("{:.3}", self.bin_frequency(b))).collect();
        writeln!(out, "{}", header.join(","))?;
        for row in &self.magnitudes_db {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| AncError::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(|e| AncError::io(path, e))
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Per-frame one-sided power spectra `|X_k|²` of Hann-windowed frames.
pub fn stft_power(x: &Signal, frame: usize, hop: usize) -> Result<Vec<Vec<f64>>> {
    if !frame.is_power_of_two() || frame < 2 {
        return Err(AncError::Config(format!("frame size {frame} must be a power of two")));
    }
    if hop == 0 || hop > frame {
        return Err(AncError::Config(format!("hop {hop} must be in 1..={frame}")));
    }
    if x.len() < frame {
        return Err(AncError::Shape(format!("signal of {} samples is shorter than one frame ({frame})", x.len())));
    }
    let window = hann(frame);
    let fft = FftPlanner::new().plan_fft_forward(frame);
    let count = 1 + (x.len() - frame) / hop;
    let mut buf = vec![Complex64::new(0.0, 0.0); frame];
    Ok((0..count)
        .map(|f| {
            let seg = &x.samples[f * hop..f * hop + frame];
            for ((b, &s), &w) in buf.iter_mut().zip(seg).zip(&window) {
                *b = Complex64::new(s * w, 0.0);
            }
            fft.process(&mut buf);
            buf[..=frame / 2].iter().map(|c| c.norm_sqr()).collect()
        })
        .collect())
}

/// Hann-windowed magnitude spectrogram, `20·log10|X|` floored at −100 dB.
pub fn stft_spectrogram(x: &Signal, frame: usize, hop: usize) -> Result<SpectrogramMatrix> {
    let power = stft_power(x, frame, hop)?;
    let magnitudes_db = power
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|p| if p > 0.0 { (10.0 * p.log10()).max(SPECTROGRAM_FLOOR_DB) } else { SPECTROGRAM_FLOOR_DB })
                .collect()
        })
        .collect();
    Ok(SpectrogramMatrix {
        magnitudes_db,
        frame_size: frame,
        hop,
        sample_rate: x.sample_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tone_peak_bin() {
        let x: Vec<f64> = (0..8000).map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 16000.0).sin()).collect();
        let s = stft_spectrogram(&Signal::new(x, 16000.0).unwrap(), 512, 256).unwrap();
        assert_eq!(s.bins(), 257);
        for row in &s.magnitudes_db {
            let peak = row.iter().enumerate().fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b }).0;
            assert_eq!(peak, 32);
        }
    }

    #[test]
    fn silence_at_floor() {
        let s = stft_spectrogram(&Signal::zeros(2048, 16000.0), 256, 128).unwrap();
        assert!(s.magnitudes_db.iter().flatten().all(|&v| v == SPECTROGRAM_FLOOR_DB));
    }

    #[test]
    fn parseval_per_frame() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..3000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sig = Signal::new(x.clone(), 16000.0).unwrap();
        let frame = 256;
        let hop = 100;
        let w = hann(frame);
        for (f, row) in stft_power(&sig, frame, hop).unwrap().iter().enumerate() {
            let time: f64 = (0..frame).map(|i| (x[f * hop + i] * w[i]).powi(2)).sum();
            let freq: f64 = row
                .iter()
                .enumerate()
                .map(|(k, p)| if k == 0 || k == frame / 2 { *p } else { 2.0 * p })
                .sum::<f64>()
                / frame as f64;
            assert!((time - freq).abs() <= 1e-9 * time.max(1.0));
        }
    }

    #[test]
    fn rejects_short_and_bad_frames() {
        let s = Signal::zeros(100, 16000.0);
        assert!(matches!(stft_spectrogram(&s, 256, 128), Err(AncError::Shape(_))));
        assert!(stft_spectrogram(&Signal::zeros(1000, 16000.0), 300, 128).is_err());
        assert!(stft_spectrogram(&Signal::zeros(1000, 16000.0), 256, 0).is_err());
    }

    #[test]
    fn csv_header_is_bin_frequencies() {
        let s = stft_spectrogram(&Signal::zeros(64, 16000.0), 32, 32).unwrap();
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 17);
        assert!(header.starts_with("0.000,500.000,"));
    }
}
