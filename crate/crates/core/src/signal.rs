//! Sampled waveforms and FIR kernels shared by every module.

use crate::error::{AncError, Result};

/// A mono sampled waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

impl Signal {
    /// Builds a signal, rejecting non-finite samples or a non-positive rate.
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(AncError::Domain(format!("sample rate {sample_rate} must be positive")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(AncError::Domain(format!("sample {i} is not finite")));
        }
        Ok(Signal { samples, sample_rate })
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Self {
        Signal {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Same rate, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Signal {
        Signal {
            samples,
            sample_rate: self.sample_rate,
        }
    }

    pub(crate) fn check_compatible(&self, other: &Signal, what: &str) -> Result<()> {
        if self.len() != other.len() {
            return Err(AncError::Shape(format!(
                "{what}: length mismatch ({} vs {})",
                self.len(),
                other.len()
            )));
        }
        if self.sample_rate != other.sample_rate {
            return Err(AncError::Shape(format!(
                "{what}: sample rate mismatch ({} vs {})",
                self.sample_rate, other.sample_rate
            )));
        }
        Ok(())
    }
}

/// Taps of a causal FIR filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FirCoeffs(Vec<f64>);

impl FirCoeffs {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(AncError::Shape("FIR must have at least one tap".into()));
        }
        if let Some(i) = taps.iter().position(|v| !v.is_finite()) {
            return Err(AncError::Domain(format!("FIR tap {i} is not finite")));
        }
        Ok(FirCoeffs(taps))
    }

    /// `[1.0]`
    pub fn identity() -> Self {
        FirCoeffs(vec![1.0])
    }

    /// A pure delay with the given gain.
    pub fn delayed_impulse(delay: usize, gain: f64) -> Self {
        let mut taps = vec![0.0; delay + 1];
        taps[delay] = gain;
        FirCoeffs(taps)
    }

    pub fn taps(&self) -> &[f64] {
        &self.0
    }

    pub fn into_taps(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, gain: f64) -> FirCoeffs {
        FirCoeffs(self.0.iter().map(|v| v * gain).collect())
    }

    /// Index of the tap with the largest magnitude.
    pub fn peak_index(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) })
            .0
    }
}
