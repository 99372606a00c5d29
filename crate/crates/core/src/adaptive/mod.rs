//! Classical ANC baselines run in closed loop against a [`PlantModel`].
//!
//! Every adaptive algorithm uses the exact secondary path as its model and
//! starts from zero weights. Each pass over a [`Scenario`] continues from
//! the current weights, so repeated passes over the same data converge the
//! filter fully.

mod freq;
mod fxlms;
mod wiener;

pub use freq::{fd_felms_whitened_run, fd_fxnlms_run, FdFelmsWhitened, FdFxnlms};
pub use fxlms::{td_fxlms_run, thf_fxlms_run, TdFxlms, ThfFxlms};
pub use wiener::{levinson_solve, wiener_design, wiener_design_with, WienerDesign};

use crate::acoustics::PlantModel;
use crate::dsp::convolve::direct_convolve_slice;
use crate::dsp::metrics::nmse_db_slice;
use crate::error::{AncError, Result};
use crate::signal::{FirCoeffs, Signal};

/// Error energy above this multiple of the disturbance energy is divergence.
pub const DIVERGENCE_RATIO: f64 = 1e6;

/// Fraction of a run treated as steady state.
pub const STEADY_STATE_FRACTION: f64 = 0.2;

/// Precomputed signals shared by every pass over one reference.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub x: Signal,
    pub plant: PlantModel,
    /// Disturbance `p∗x`.
    pub disturbance: Vec<f64>,
    /// Filtered reference `ŝ∗x` through the exact secondary path.
    pub filtered_reference: Vec<f64>,
}

impl Scenario {
    pub fn new(x: &Signal, plant: &PlantModel) -> Result<Self> {
        if x.is_empty() {
            return Err(AncError::Shape("reference signal is empty".into()));
        }
        if x.samples.iter().any(|v| !v.is_finite()) {
            return Err(AncError::Domain("reference signal contains non-finite samples".into()));
        }
        Ok(Scenario {
            x: x.clone(),
            plant: plant.clone(),
            disturbance: plant.disturbance(&x.samples),
            filtered_reference: direct_convolve_slice(&x.samples, plant.secondary.taps()),
        })
    }

    /// A scenario whose disturbance is not `p∗x`, e.g. when the reference
    /// is picked up by a microphone rather than taken from the source.
    pub fn with_disturbance(x: &Signal, plant: &PlantModel, disturbance: Vec<f64>) -> Result<Self> {
        if disturbance.len() != x.len() {
            return Err(AncError::Shape(format!(
                "disturbance has {} samples, reference {}",
                disturbance.len(),
                x.len()
            )));
        }
        let mut s = Scenario::new(x, plant)?;
        s.disturbance = disturbance;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn disturbance_signal(&self) -> Signal {
        self.x.with_samples(self.disturbance.clone())
    }

    /// Mean power of the filtered reference.
    pub fn filtered_reference_power(&self) -> f64 {
        self.filtered_reference.iter().map(|v| v * v).sum::<f64>() / self.len() as f64
    }

    /// The `2 / (L·P_r)` LMS stability estimate for `taps` weights.
    pub fn lms_step_bound(&self, taps: usize) -> f64 {
        2.0 / (taps as f64 * self.filtered_reference_power().max(f64::MIN_POSITIVE))
    }
}

/// `r = ŝ∗x`, causal and truncated.
pub fn filtered_reference(x: &Signal, s_hat: &FirCoeffs) -> Result<Signal> {
    if s_hat.is_empty() {
        return Err(AncError::Shape("secondary path model is empty".into()));
    }
    Ok(x.with_samples(direct_convolve_slice(&x.samples, s_hat.taps())))
}

/// Outcome of one pass of an adaptive controller.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub error_signal: Signal,
    pub final_weights: Vec<f64>,
    pub diverged: bool,
    pub converged_at: Option<usize>,
}

impl RunReport {
    /// NMSE over the last 20% of the pass (whole pass when diverged early).
    pub fn steady_state_nmse_db(&self, disturbance: &[f64]) -> Result<f64> {
        let n = self.error_signal.len();
        if n == 0 {
            return Err(AncError::Numerical("run produced no samples".into()));
        }
        let start = n - ((n as f64 * STEADY_STATE_FRACTION).ceil() as usize).clamp(1, n);
        nmse_db_slice(&self.error_signal.samples[start..], &disturbance[start..n])
    }

    pub fn nmse_db(&self, disturbance: &[f64]) -> Result<f64> {
        let n = self.error_signal.len();
        nmse_db_slice(&self.error_signal.samples, &disturbance[..n])
    }
}

/// Tap-delay line with a contiguous newest-first window.
#[derive(Debug, Clone)]
pub(crate) struct DelayLine {
    buf: Vec<f64>,
    len: usize,
    pos: usize,
}

impl DelayLine {
    pub(crate) fn new(len: usize) -> Self {
        DelayLine {
            buf: vec![0.0; 2 * len],
            len,
            pos: 0,
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, v: f64) {
        self.pos = if self.pos == 0 { self.len - 1 } else { self.pos - 1 };
        self.buf[self.pos] = v;
        self.buf[self.pos + self.len] = v;
    }

    /// `window()[k]` is the sample pushed `k` steps ago.
    #[inline]
    pub(crate) fn window(&self) -> &[f64] {
        &self.buf[self.pos..self.pos + self.len]
    }
}

/// Dot product with eight partial sums so the loop vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 8];
    let split = n - n % 8;
    for (ca, cb) in a[..split].chunks_exact(8).zip(b[..split].chunks_exact(8)) {
        for j in 0..8 {
            acc[j] += ca[j] * cb[j];
        }
    }
    let tail: f64 = a[split..].iter().zip(&b[split..]).map(|(x, y)| x * y).sum();
    acc.iter().sum::<f64>() + tail
}

/// Tracks error energy against the disturbance energy of the whole pass.
pub(crate) struct DivergenceGuard {
    limit: f64,
    energy: f64,
}

impl DivergenceGuard {
    pub(crate) fn new(disturbance: &[f64]) -> Self {
        let d: f64 = disturbance.iter().map(|v| v * v).sum();
        DivergenceGuard {
            limit: DIVERGENCE_RATIO * d.max(f64::MIN_POSITIVE),
            energy: 0.0,
        }
    }

    /// Returns true once the pass must halt.
    #[inline]
    pub(crate) fn exceeded(&mut self, e: f64) -> bool {
        self.energy += e * e;
        !e.is_finite() || self.energy > self.limit
    }
}

/// First sample from which every 1024-sample block stays within 3 dB of
/// the steady-state level.
pub(crate) fn convergence_index(e: &[f64], d: &[f64]) -> Option<usize> {
    const BLOCK: usize = 1024;
    let n = e.len();
    if n < 5 * BLOCK {
        return None;
    }
    let start = n - (n as f64 * STEADY_STATE_FRACTION).ceil() as usize;
    let steady = nmse_db_slice(&e[start..], &d[start..n]).ok()?;
    let blocks = n / BLOCK;
    let mut first_good = None;
    for b in 0..blocks {
        let r = b * BLOCK..(b + 1) * BLOCK;
        let good = match nmse_db_slice(&e[r.clone()], &d[r]) {
            Ok(v) => v <= steady + 3.0,
            Err(_) => true,
        };
        match (good, first_good) {
            (true, None) => first_good = Some(b * BLOCK),
            (false, Some(_)) => first_good = None,
            _ => {}
        }
    }
    first_good
}

/// Assembles a report from the (possibly truncated) error trajectory.
pub(crate) fn finish_report(
    scenario: &Scenario,
    mut error: Vec<f64>,
    processed: usize,
    diverged: bool,
    weights: &[f64],
) -> RunReport {
    error.truncate(processed);
    if diverged {
        // Keep the report finite: drop the offending sample if it blew up.
        while error.last().is_some_and(|v| !v.is_finite()) {
            error.pop();
        }
    }
    let converged_at = if diverged {
        None
    } else {
        convergence_index(&error, &scenario.disturbance)
    };
    let final_weights = if weights.iter().all(|w| w.is_finite()) {
        weights.to_vec()
    } else {
        vec![0.0; weights.len()]
    };
    RunReport {
        error_signal: scenario.x.with_samples(error),
        final_weights,
        diverged,
        converged_at,
    }
}

/// Something that adapts a control filter over repeated passes.
pub trait AdaptiveController: Send {
    fn label(&self) -> String;
    fn weights(&self) -> &[f64];
    fn run_pass(&mut self, scenario: &Scenario) -> Result<RunReport>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delay_line_window() {
        let mut d = DelayLine::new(3);
        for v in 1..=5 {
            d.push(v as f64);
        }
        assert_eq!(d.window(), &[5.0, 4.0, 3.0]);
    }

    #[test]
    fn filtered_reference_cases() {
        let x = Signal::new(vec![1.0, 2.0, 3.0, 4.0], 16000.0).unwrap();
        assert_eq!(filtered_reference(&x, &FirCoeffs::identity()).unwrap().samples, x.samples);
        let r = filtered_reference(&x, &FirCoeffs::delayed_impulse(1, 1.0)).unwrap();
        assert_eq!(r.samples, vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn filtered_reference_matches_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..500).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = filtered_reference(&Signal::new(x.clone(), 16000.0).unwrap(), &FirCoeffs::new(s.clone()).unwrap()).unwrap();
        for n in 0..x.len() {
            let o: f64 = (0..s.len()).filter(|&k| k <= n).map(|k| s[k] * x[n - k]).sum();
            assert!((o - r.samples[n]).abs() < 1e-12);
        }
    }
}
