//! Linear-phase FIR approximation of the A-weighting curve.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{AncError, Result};
use crate::signal::FirCoeffs;

const F1: f64 = 20.598997;
const F2: f64 = 107.65265;
const F3: f64 = 737.86223;
const F4: f64 = 12194.217;

pub const MIN_RATE: f64 = 8000.0;
pub const MAX_RATE: f64 = 48000.0;

fn a_response(f: f64) -> f64 {
    let f2 = f * f;
    F4 * F4 * f2 * f2
        / ((f2 + F1 * F1) * ((f2 + F2 * F2) * (f2 + F3 * F3)).sqrt() * (f2 + F4 * F4))
}

/// Analog A-weighting magnitude, linear, normalized to 1 at 1 kHz.
pub fn a_weighting_gain(f: f64) -> f64 {
    a_response(f.abs()) / a_response(1000.0)
}

/// Default tap count for a sample rate: about 128 ms of support, odd.
///
/// Shorter filters cannot resolve the steep low-frequency slope of the
/// curve (a 257-tap filter at 16 kHz is 2 dB off at 63 Hz).
pub fn default_a_weighting_length(sample_rate: f64) -> usize {
    let half = ((sample_rate / 16.0).round() as usize).next_power_of_two();
    2 * half + 1
}

/// Designs an odd-length linear-phase A-weighting filter by sampling the
/// analog magnitude on a dense FFT grid, centring the zero-phase impulse
/// response and applying a Hann window. Group delay is `(length − 1) / 2`.
pub fn a_weighting_fir(sample_rate: f64, length: usize) -> Result<FirCoeffs> {
    if !(MIN_RATE..=MAX_RATE).contains(&sample_rate) {
        return Err(AncError::Domain(format!(
            "A-weighting supports {MIN_RATE}..{MAX_RATE} Hz, got {sample_rate}"
        )));
    }
    if length < 129 || length % 2 == 0 {
        return Err(AncError::Domain(format!("A-weighting length must be odd and >= 129, got {length}")));
    }
    let grid = (8 * length).next_power_of_two().max(1 << 16);
    let mut spec: Vec<Complex64> = (0..grid)
        .map(|k| {
            let bin = if k <= grid / 2 { k } else { grid - k };
            Complex64::new(a_weighting_gain(bin as f64 * sample_rate / grid as f64), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(grid).process(&mut spec);
    let half = length / 2;
    let taps = (0..length)
        .map(|n| {
            let lag = (n + grid - half) % grid;
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * (n + 1) as f64 / (length + 1) as f64).cos();
            spec[lag].re / grid as f64 * w
        })
        .collect();
    FirCoeffs::new(taps)
}

/// Magnitude response of an FIR at frequency `f`, in dB.
pub fn fir_gain_db(h: &FirCoeffs, sample_rate: f64, f: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * f / sample_rate;
    let (re, im) = h
        .taps()
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(re, im), (n, &v)| (re + v * (w * n as f64).cos(), im - v * (w * n as f64).sin()));
    10.0 * (re * re + im * im).log10()
}
