//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc.

use crate::error::{AncError, Result};
use crate::signal::Signal;

pub const MIN_RATE: f64 = 8000.0;
pub const MAX_RATE: f64 = 48000.0;

/// Passband edge as a fraction of the lower of the two rates.
const PASS_EDGE: f64 = 0.45;
/// Stopband edge as a fraction of the lower of the two rates.
const STOP_EDGE: f64 = 0.49375;
const STOPBAND_DB: f64 = 80.0;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64).powi(2);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn check_rate(rate: f64) -> Result<u64> {
    if !(MIN_RATE..=MAX_RATE).contains(&rate) || rate.fract() != 0.0 {
        return Err(AncError::Config(format!(
            "unsupported sample rate {rate}; expected an integer in {MIN_RATE}..={MAX_RATE}"
        )));
    }
    Ok(rate as u64)
}

/// Resamples to `target_rate`, compensating the filter delay so the output
/// is time-aligned with the input. Output length is `round(N·fo/fi)`.
pub fn resample(signal: &Signal, target_rate: f64) -> Result<Signal> {
    let fi = check_rate(signal.sample_rate)?;
    let fo = check_rate(target_rate)?;
    if fi == fo {
        return Ok(signal.clone());
    }
    let g = gcd(fi, fo);
    let up = (fo / g) as usize;
    let down = (fi / g) as usize;
    let high_rate = (fi * up as u64) as f64;
    let low = fi.min(fo) as f64;
    let cutoff = 0.5 * (PASS_EDGE + STOP_EDGE) * low;
    let transition = 2.0 * std::f64::consts::PI * (STOP_EDGE - PASS_EDGE) * low / high_rate;
    let beta = 0.1102 * (STOPBAND_DB - 8.7);
    let mut taps = ((STOPBAND_DB - 8.0) / (2.285 * transition)).ceil() as usize + 1;
    if taps % 2 == 0 {
        taps += 1;
    }
    let centre = (taps - 1) as f64 / 2.0;
    let norm = 2.0 * cutoff / high_rate;
    let i0_beta = bessel_i0(beta);
    let h: Vec<f64> = (0..taps)
        .map(|k| {
            let t = k as f64 - centre;
            let arg = norm * t;
            let sinc = if arg == 0.0 {
                1.0
            } else {
                (std::f64::consts::PI * arg).sin() / (std::f64::consts::PI * arg)
            };
            let ratio = t / centre;
            let w = bessel_i0(beta * (1.0 - ratio * ratio).max(0.0).sqrt()) / i0_beta;
            up as f64 * norm * sinc * w
        })
        .collect();

    let delay = (taps - 1) / 2;
    let n_in = signal.len();
    let n_out = ((n_in as u128 * fo as u128 + fi as u128 / 2) / fi as u128) as usize;
    let x = &signal.samples;
    let out = (0..n_out)
        .map(|m| {
            // Position in the zero-stuffed domain, delay-compensated.
            let pos = m * down + delay;
            let first = (pos + 1).saturating_sub(taps).div_ceil(up);
            let last = (pos / up).min(n_in.saturating_sub(1));
            let mut acc = 0.0;
            let mut i = first;
            while i <= last && i < n_in {
                acc += h[pos - i * up] * x[i];
                i += 1;
            }
            acc
        })
        .collect();
    Signal::new(out, target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::num_complex::Complex64;
    use rustfft::FftPlanner;

    fn tone(f: f64, fs: f64, secs: f64) -> Signal {
        let n = (fs * secs) as usize;
        Signal::new((0..n).map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin()).collect(), fs).unwrap()
    }

    /// Peak frequency (parabolic interpolation on a Hann-windowed FFT) and
    /// RMS of the central portion.
    fn analyse(s: &Signal) -> (f64, f64) {
        let trim = s.len() / 10;
        let seg = &s.samples[trim..s.len() - trim];
        let n = seg.len();
        let mut buf: Vec<Complex64> = seg
            .iter()
            .enumerate()
            .map(|(i, &v)| Complex64::new(v * (0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()), 0.0))
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let mag: Vec<f64> = buf[..n / 2].iter().map(|c| c.norm()).collect();
        let k = (1..n / 2 - 1).max_by(|&a, &b| mag[a].partial_cmp(&mag[b]).unwrap()).unwrap();
        let (a, b, c) = (mag[k - 1].ln(), mag[k].ln(), mag[k + 1].ln());
        let delta = 0.5 * (a - c) / (a - 2.0 * b + c);
        let rms = (seg.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        ((k as f64 + delta) * s.sample_rate / n as f64, rms)
    }

    #[test]
    fn identity_when_rates_match() {
        let s = tone(440.0, 16000.0, 0.1);
        assert_eq!(resample(&s, 16000.0).unwrap(), s);
    }

    #[test]
    fn tone_48k_to_16k() {
        let out = resample(&tone(1000.0, 48000.0, 1.0), 16000.0).unwrap();
        assert_eq!(out.len(), 16000);
        let (f, rms) = analyse(&out);
        assert!((f - 1000.0).abs() <= 1.0, "{f}");
        let gain_db = 20.0 * (rms / (0.5f64).sqrt()).log10();
        assert!(gain_db.abs() <= 0.1, "{gain_db}");
    }

    #[test]
    fn alias_rejected() {
        let input = tone(7900.0, 48000.0, 1.0);
        let out = resample(&input, 16000.0).unwrap();
        let trim = 2000;
        let p_out: f64 = out.samples[trim..out.len() - trim].iter().map(|v| v * v).sum::<f64>() / (out.len() - 2 * trim) as f64;
        let rel_db = 10.0 * (p_out / 0.5).log10();
        assert!(rel_db <= -60.0, "{rel_db}");
    }

    #[test]
    fn upsampling_preserves_tone() {
        let out = resample(&tone(1000.0, 16000.0, 0.5), 44100.0).unwrap();
        assert_eq!(out.len(), 22050);
        let (f, rms) = analyse(&out);
        assert!((f - 1000.0).abs() <= 1.0);
        assert!((20.0 * (rms / 0.5f64.sqrt()).log10()).abs() <= 0.1);
    }

    #[test]
    fn duration_preserved() {
        for (fi, fo, n) in [(48000.0, 16000.0, 4801), (44100.0, 16000.0, 12345), (8000.0, 22050.0, 999)] {
            let s = Signal::zeros(n, fi);
            let out = resample(&s, fo).unwrap();
            let ideal = n as f64 * fo / fi;
            assert!((out.len() as f64 - ideal).abs() <= 1.0);
        }
    }

    #[test]
    fn unsupported_rates() {
        let s = Signal::zeros(10, 96000.0);
        assert!(matches!(resample(&s, 16000.0), Err(AncError::Config(_))));
        let s = Signal::zeros(10, 16000.0);
        assert!(matches!(resample(&s, 4000.0), Err(AncError::Config(_))));
    }
}
