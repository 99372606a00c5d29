//! Seeded synthetic noise sources standing in for recorded corpora.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::segment::{peak_normalize, TRAINING_RATE};
use crate::error::{AncError, Result};
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    White,
    Pink,
    EngineHarmonics,
    ModulatedBabbleLike,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [
        NoiseKind::White,
        NoiseKind::Pink,
        NoiseKind::EngineHarmonics,
        NoiseKind::ModulatedBabbleLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
            NoiseKind::EngineHarmonics => "engine_harmonics",
            NoiseKind::ModulatedBabbleLike => "modulated_babble_like",
        }
    }

    fn stream(self) -> u64 {
        match self {
            NoiseKind::White => 0x5748,
            NoiseKind::Pink => 0x504b,
            NoiseKind::EngineHarmonics => 0x454e,
            NoiseKind::ModulatedBabbleLike => 0x4242,
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = AncError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.name() == key || (key == "engine" && *k == NoiseKind::EngineHarmonics) || (key == "babble" && *k == NoiseKind::ModulatedBabbleLike))
            .ok_or_else(|| AncError::Config(format!("unknown noise kind '{s}'")))
    }
}

/// Fundamental of the engine source for a given seed, in 80..120 Hz.
pub fn engine_fundamental(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf0f0);
    rng.gen_range(80.0..120.0)
}

pub const ENGINE_HARMONICS: usize = 12;

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Applies a real, even magnitude response to `x` through one FFT pass.
fn shape_spectrum(x: &[f64], fs: f64, gain: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let kk = k.min(n - k);
        *c *= gain(kk as f64 * fs / n as f64);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

fn pink(rng: &mut ChaCha8Rng, n: usize, fs: f64) -> Vec<f64> {
    let white = gaussian(rng, n);
    shape_spectrum(&white, fs, |f| if f == 0.0 { 0.0 } else { 1.0 / f.max(10.0).sqrt() })
}

fn engine(rng: &mut ChaCha8Rng, n: usize, fs: f64, f0: f64) -> Vec<f64> {
    let phases: Vec<f64> = (0..ENGINE_HARMONICS).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let mut out = vec![0.0; n];
    for (k, &phi) in phases.iter().enumerate() {
        let h = (k + 1) as f64;
        if h * f0 >= 0.5 * fs {
            break;
        }
        let amp = 1.0 / h.sqrt();
        let w = 2.0 * PI * h * f0 / fs;
        for (i, o) in out.iter_mut().enumerate() {
            *o += amp * (w * i as f64 + phi).sin();
        }
    }
    // Broadband floor 30 dB below the harmonic complex.
    let floor = pink(rng, n, fs);
    let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
    let scale = 10f64.powf(-30.0 / 20.0) * rms(&out) / rms(&floor).max(1e-300);
    out.iter_mut().zip(&floor).for_each(|(o, f)| *o += scale * f);
    out
}

fn babble(rng: &mut ChaCha8Rng, n: usize, fs: f64) -> Vec<f64> {
    const TALKERS: usize = 5;
    let mut out = vec![0.0; n];
    for _ in 0..TALKERS {
        let band = shape_spectrum(&gaussian(rng, n), fs, |f| if (300.0..=3400.0).contains(&f) { 1.0 } else { 0.0 });
        let fm = rng.gen_range(2.0..8.0);
        let phase = rng.gen_range(0.0..2.0 * PI);
        let gain = rng.gen_range(0.5..1.0);
        for (i, (o, b)) in out.iter_mut().zip(&band).enumerate() {
            let env = 0.5 * (1.0 + (2.0 * PI * fm * i as f64 / fs + phase).sin());
            *o += gain * env * env * b;
        }
    }
    out
}

/// Peak-normalized synthetic noise at 16 kHz.
pub fn synth_noise(kind: NoiseKind, seconds: f64, seed: u64) -> Result<Signal> {
    synth_noise_at(kind, seconds, seed, TRAINING_RATE)
}

pub fn synth_noise_at(kind: NoiseKind, seconds: f64, seed: u64, sample_rate: f64) -> Result<Signal> {
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(AncError::Domain(format!("noise duration must be positive, got {seconds} s")));
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(AncError::Domain(format!("bad sample rate {sample_rate}")));
    }
    let n = ((seconds * sample_rate).round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(kind.stream());
    let raw = match kind {
        NoiseKind::White => gaussian(&mut rng, n),
        NoiseKind::Pink => pink(&mut rng, n, sample_rate),
        NoiseKind::EngineHarmonics => engine(&mut rng, n, sample_rate, engine_fundamental(seed)),
        NoiseKind::ModulatedBabbleLike => babble(&mut rng, n, sample_rate),
    };
    peak_normalize(&Signal::new(raw, sample_rate)?)
}
