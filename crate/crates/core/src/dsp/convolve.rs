//! Causal linear convolution, truncated to the input length.
//!
//! Two routes compute the same thing: a direct O(N·K) loop and an
//! overlap-save FFT engine. The adjoint (time-reversed correlation) is used
//! by the gradient paths.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{AncError, Result};
use crate::signal::{FirCoeffs, Signal};

/// Kernels at most this long go through the direct loop in [`convolve_auto`].
const DIRECT_KERNEL_LIMIT: usize = 48;
/// Below this many multiply-adds the direct loop is used regardless.
const DIRECT_WORK_LIMIT: usize = 1 << 18;

/// `out[n] = Σ_k h[k]·x[n−k]` for `n < x.len()`.
pub fn direct_convolve_slice(x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (k, &hk) in h.iter().enumerate() {
        if hk == 0.0 || k >= x.len() {
            continue;
        }
        for (o, &xv) in out[k..].iter_mut().zip(x) {
            *o += hk * xv;
        }
    }
    out
}

pub fn direct_convolve(x: &Signal, h: &FirCoeffs) -> Result<Signal> {
    if x.is_empty() {
        return Err(AncError::Shape("convolution input is empty".into()));
    }
    Ok(x.with_samples(direct_convolve_slice(&x.samples, h.taps())))
}

pub fn fast_convolve(x: &Signal, h: &FirCoeffs) -> Result<Signal> {
    if x.is_empty() {
        return Err(AncError::Shape("convolution input is empty".into()));
    }
    Ok(x.with_samples(OverlapSave::new(h.taps()).convolve(&x.samples)))
}

/// Picks the direct loop for short kernels or small jobs, overlap-save otherwise.
pub fn convolve_auto(x: &[f64], h: &[f64]) -> Vec<f64> {
    let work = x.len() * h.len().min(x.len());
    if h.len() <= DIRECT_KERNEL_LIMIT || x.len() <= DIRECT_KERNEL_LIMIT || work <= DIRECT_WORK_LIMIT {
        direct_convolve_slice(x, h)
    } else {
        OverlapSave::new(h).convolve(x)
    }
}

/// Adjoint of the truncated causal convolution:
/// `out[m] = Σ_k h[k]·g[m+k]` over `m + k < g.len()`.
pub fn adjoint_convolve_slice(g: &[f64], h: &[f64]) -> Vec<f64> {
    let reversed: Vec<f64> = g.iter().rev().copied().collect();
    let mut out = convolve_auto(&reversed, h);
    out.reverse();
    out
}

/// Overlap-save convolution engine for one fixed kernel.
///
/// The FFT size is the smallest power of two at least twice the kernel
/// length (and at least 64); each block yields `fft_size − K + 1` outputs.
#[derive(Clone)]
pub struct OverlapSave {
    kernel_len: usize,
    fft_size: usize,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for OverlapSave {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OverlapSave")
            .field("kernel_len", &self.kernel_len)
            .field("fft_size", &self.fft_size)
            .finish()
    }
}

impl OverlapSave {
    pub fn new(h: &[f64]) -> Self {
        let kernel_len = h.len().max(1);
        let fft_size = (2 * kernel_len).next_power_of_two().max(64);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_size);
        let inverse = planner.plan_fft_inverse(fft_size);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); fft_size];
        for (s, &v) in spectrum.iter_mut().zip(h) {
            s.re = v;
        }
        forward.process(&mut spectrum);
        OverlapSave {
            kernel_len,
            fft_size,
            spectrum,
            forward,
            inverse,
        }
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn convolve(&self, x: &[f64]) -> Vec<f64> {
        let n = self.fft_size;
        let k = self.kernel_len;
        let step = n - k + 1;
        let scale = 1.0 / n as f64;
        let mut out = vec![0.0; x.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut start = 0;
        while start < x.len() {
            // The block window begins K-1 samples before `start`.
            for (j, b) in buf.iter_mut().enumerate() {
                let idx = (start + j) as isize - (k as isize - 1);
                let v = if idx >= 0 && (idx as usize) < x.len() { x[idx as usize] } else { 0.0 };
                *b = Complex64::new(v, 0.0);
            }
            self.forward.process(&mut buf);
            for (b, s) in buf.iter_mut().zip(&self.spectrum) {
                *b *= s;
            }
            self.inverse.process(&mut buf);
            let valid = step.min(x.len() - start);
            for j in 0..valid {
                out[start + j] = buf[k - 1 + j].re * scale;
            }
            start += step;
        }
        out
    }

    pub fn adjoint(&self, g: &[f64]) -> Vec<f64> {
        let reversed: Vec<f64> = g.iter().rev().copied().collect();
        let mut out = self.convolve(&reversed);
        out.reverse();
        out
    }
}
