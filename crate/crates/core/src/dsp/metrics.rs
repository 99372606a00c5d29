//! NMSE and A-weighted level-difference metrics.

use crate::dsp::convolve::{direct_convolve_slice, OverlapSave};
use crate::dsp::weighting::{a_weighting_fir, default_a_weighting_length};
use crate::error::{AncError, Result};
use crate::signal::Signal;

/// Lowest value any metric reports.
pub const METRIC_FLOOR_DB: f64 = -120.0;

/// One cell of a results table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub algorithm: String,
    pub noise: String,
    pub eta2: String,
    pub nmse_db: f64,
    pub dba_delta_db: f64,
}

fn ratio_db(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        return METRIC_FLOOR_DB;
    }
    (10.0 * (num / den).log10()).max(METRIC_FLOOR_DB)
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn nmse_db(e: &Signal, d: &Signal) -> Result<f64> {
    e.check_compatible(d, "nmse_db")?;
    nmse_db_slice(&e.samples, &d.samples)
}

pub fn nmse_db_slice(e: &[f64], d: &[f64]) -> Result<f64> {
    if e.len() != d.len() {
        return Err(AncError::Shape(format!("nmse_db: length mismatch ({} vs {})", e.len(), d.len())));
    }
    let den = energy(d);
    if den <= 0.0 {
        return Err(AncError::DegenerateReference);
    }
    Ok(ratio_db(energy(e), den))
}

const DIRECT_LIMIT: usize = 4096;

/// A-weighting filter bound to one sample rate.
#[derive(Debug, Clone)]
pub struct AWeighting {
    taps: Vec<f64>,
    engine: OverlapSave,
    sample_rate: f64,
}

impl AWeighting {
    pub fn new(sample_rate: f64) -> Result<Self> {
        let h = a_weighting_fir(sample_rate, default_a_weighting_length(sample_rate))?;
        Ok(AWeighting {
            engine: OverlapSave::new(h.taps()),
            taps: h.into_taps(),
            sample_rate,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    // Short inputs only reach the small leading taps, where FFT round-off
    // would dominate the result, so they take the direct loop.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        if x.len() <= DIRECT_LIMIT {
            direct_convolve_slice(x, &self.taps)
        } else {
            self.engine.convolve(x)
        }
    }

    pub fn adjoint(&self, g: &[f64]) -> Vec<f64> {
        if g.len() <= DIRECT_LIMIT {
            let reversed: Vec<f64> = g.iter().rev().copied().collect();
            let mut out = direct_convolve_slice(&reversed, &self.taps);
            out.reverse();
            out
        } else {
            self.engine.adjoint(g)
        }
    }

    /// `10·log10(Σ(a∗e)² / Σ(a∗d)²)`, floored.
    pub fn delta_db(&self, e: &[f64], d: &[f64]) -> Result<f64> {
        if e.len() != d.len() {
            return Err(AncError::Shape(format!("dba_delta_db: length mismatch ({} vs {})", e.len(), d.len())));
        }
        let den = energy(&self.apply(d));
        if den <= 0.0 {
            return Err(AncError::DegenerateReference);
        }
        Ok(ratio_db(energy(&self.apply(e)), den))
    }
}

/// A-weighted power ratio of error to disturbance in dB; negative is a reduction.
pub fn dba_delta_db(e: &Signal, d: &Signal) -> Result<f64> {
    e.check_compatible(d, "dba_delta_db")?;
    AWeighting::new(d.sample_rate)?.delta_db(&e.samples, &d.samples)
}
