//! Overlap-save block adaptive filters: FD-FxNLMS and the whitened
//! filtered-error FD-LMS with multi-frame updates.
//!
//! Both use block length `L` equal to the filter length and FFT size `2L`.
//! The weight gradient is constrained to its first `L` lags, so the filter
//! stays a causal length-`L` FIR.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{dot, finish_report, AdaptiveController, DelayLine, DivergenceGuard, RunReport, Scenario};
use crate::acoustics::{sef_unchecked, PlantModel};
use crate::error::{AncError, Result};
use crate::signal::Signal;

/// Per-bin power floor relative to the mean bin power.
const POWER_REGULARIZATION: f64 = 1e-4;

struct BlockFft {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl BlockFft {
    fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        BlockFft {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        buf.resize(self.size, Complex64::new(0.0, 0.0));
        self.forward.process(&mut buf);
        buf
    }

    fn inverse(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        buf.into_iter().map(|c| c.re * scale).collect()
    }
}

/// `len` samples of `x` starting at `start`, zero outside the signal.
fn window(x: &[f64], start: isize, len: usize) -> Vec<f64> {
    (0..len)
        .map(|j| {
            let i = start + j as isize;
            if i >= 0 && (i as usize) < x.len() {
                x[i as usize]
            } else {
                0.0
            }
        })
        .collect()
}

fn check_block_args(taps: usize, mu: f64, forgetting: f64) -> Result<()> {
    if taps < 2 || !taps.is_power_of_two() {
        return Err(AncError::Config(format!("block filter length {taps} must be a power of two")));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(AncError::Config(format!("step size {mu} must be positive")));
    }
    if !(0.0..1.0).contains(&forgetting) {
        return Err(AncError::Config(format!("forgetting factor {forgetting} must lie in [0, 1)")));
    }
    Ok(())
}

/// Control output for one block: the last `L` samples of the circular
/// convolution of the `2L` reference window with the zero-padded weights.
fn block_control(fft: &BlockFft, x: &[f64], start: usize, weights_spec: &[Complex64]) -> Vec<f64> {
    let l = fft.size / 2;
    let mut xs = fft.forward(&window(x, start as isize - l as isize, 2 * l));
    for (a, b) in xs.iter_mut().zip(weights_spec) {
        *a *= b;
    }
    fft.inverse(xs).split_off(l)
}

fn update_power(power: &mut Option<Vec<f64>>, fresh: Vec<f64>, forgetting: f64) -> &[f64] {
    match power {
        Some(p) => {
            for (pk, f) in p.iter_mut().zip(fresh) {
                *pk = forgetting * *pk + (1.0 - forgetting) * f;
            }
        }
        None => *power = Some(fresh),
    }
    power.as_deref().unwrap()
}

fn regularized(power: &[f64]) -> impl Iterator<Item = f64> + '_ {
    let mean = power.iter().sum::<f64>() / power.len() as f64;
    let floor = POWER_REGULARIZATION * mean + 1e-30;
    power.iter().map(move |&p| p + floor)
}

/// Causal gradient lags `0..L` of a `2L`-point cross spectrum, optionally
/// preconditioned per bin.
///
/// The raw correlation is constrained to its causal lags both before and
/// after the per-bin division. Dividing the unconstrained spectrum would
/// leak the (non-zero at the optimum) negative-lag correlations into the
/// update and bias the converged filter away from the least-squares one.
fn causal_gradient(fft: &BlockFft, cross: Vec<Complex64>, power: Option<&[f64]>) -> Vec<f64> {
    let l = fft.size / 2;
    let mut lags = fft.inverse(cross);
    lags.truncate(l);
    if let Some(p) = power {
        let mut spec = fft.forward(&lags);
        for (c, pk) in spec.iter_mut().zip(regularized(p)) {
            *c /= pk;
        }
        lags = fft.inverse(spec);
        lags.truncate(l);
    }
    lags
}

/// Frequency-domain FxNLMS with per-bin step normalization.
#[derive(Debug, Clone)]
pub struct FdFxnlms {
    weights: Vec<f64>,
    mu: f64,
    forgetting: f64,
    normalize: bool,
    power: Option<Vec<f64>>,
}

impl FdFxnlms {
    pub fn new(taps: usize, mu: f64, forgetting: f64) -> Result<Self> {
        check_block_args(taps, mu, forgetting)?;
        Ok(FdFxnlms {
            weights: vec![0.0; taps],
            mu,
            forgetting,
            normalize: true,
            power: None,
        })
    }

    /// Plain (unnormalized) block LMS: the update is `−μ·Σ e(n)·r(n−i)`.
    pub fn unnormalized(taps: usize, mu: f64) -> Result<Self> {
        let mut f = FdFxnlms::new(taps, mu, 0.0)?;
        f.normalize = false;
        Ok(f)
    }

    /// Per-bin filtered-reference power estimates, once adaptation started.
    pub fn power_estimates(&self) -> Option<&[f64]> {
        self.power.as_deref()
    }
}

impl AdaptiveController for FdFxnlms {
    fn label(&self) -> String {
        format!("FD-FxNLMS({})", self.weights.len())
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn run_pass(&mut self, scenario: &Scenario) -> Result<RunReport> {
        let l = self.weights.len();
        let fft = BlockFft::new(2 * l);
        let n_total = scenario.len();
        let plant = &scenario.plant;
        let s = plant.secondary.taps();
        let mut ul = DelayLine::new(s.len());
        let mut guard = DivergenceGuard::new(&scenario.disturbance);
        let mut error = vec![0.0; n_total];
        let mut weights_spec = fft.forward(&self.weights);
        let mut diverged = false;
        let mut processed = n_total;

        'blocks: for start in (0..n_total).step_by(l) {
            let y = block_control(&fft, &scenario.x.samples, start, &weights_spec);
            let mut e_block = vec![0.0; 2 * l];
            for j in 0..l.min(n_total - start) {
                let n = start + j;
                ul.push(sef_unchecked(y[j], plant.eta2));
                let e = scenario.disturbance[n] + dot(s, ul.window());
                error[n] = e;
                e_block[l + j] = e;
                if guard.exceeded(e) {
                    diverged = true;
                    processed = n + 1;
                    break 'blocks;
                }
            }
            let r_spec = fft.forward(&window(&scenario.filtered_reference, start as isize - l as isize, 2 * l));
            let e_spec = fft.forward(&e_block);
            let cross: Vec<Complex64> = r_spec.iter().zip(&e_spec).map(|(r, e)| r.conj() * e).collect();
            let grad = if self.normalize {
                let fresh = r_spec.iter().map(|c| c.norm_sqr()).collect();
                let p = update_power(&mut self.power, fresh, self.forgetting);
                causal_gradient(&fft, cross, Some(p))
            } else {
                causal_gradient(&fft, cross, None)
            };
            for (w, g) in self.weights.iter_mut().zip(&grad[..l]) {
                *w -= self.mu * g;
            }
            weights_spec = fft.forward(&self.weights);
        }
        Ok(finish_report(scenario, error, processed, diverged, &self.weights))
    }
}

/// Single-channel filtered-error FD-LMS with whitening and multi-frame
/// updates.
///
/// The error is filtered by the time-reversed secondary path, delayed by
/// `len(s) − 1` samples to stay causal, and correlated with the equally
/// delayed reference. Each bin is whitened by a running estimate of the
/// reference power shaped by `|S|²`. Gradients are summed over
/// `update_frames` blocks before the weights change.
#[derive(Debug, Clone)]
pub struct FdFelmsWhitened {
    weights: Vec<f64>,
    mu: f64,
    forgetting: f64,
    update_frames: usize,
    power: Option<Vec<f64>>,
    pending: Vec<f64>,
    pending_frames: usize,
}

impl FdFelmsWhitened {
    pub fn new(taps: usize, mu: f64, forgetting: f64, update_frames: usize) -> Result<Self> {
        check_block_args(taps, mu, forgetting)?;
        if update_frames == 0 {
            return Err(AncError::Config("update_frames must be at least 1".into()));
        }
        Ok(FdFelmsWhitened {
            weights: vec![0.0; taps],
            mu,
            forgetting,
            update_frames,
            power: None,
            pending: vec![0.0; taps],
            pending_frames: 0,
        })
    }
}

/// `|S(e^{jω})|²` sampled on an `n`-point grid.
fn secondary_power_response(s: &[f64], fft: &BlockFft) -> Vec<f64> {
    let n = fft.size;
    let mut folded = vec![0.0; n];
    for (i, &v) in s.iter().enumerate() {
        folded[i % n] += v;
    }
    fft.forward(&folded).iter().map(|c| c.norm_sqr()).collect()
}

impl AdaptiveController for FdFelmsWhitened {
    fn label(&self) -> String {
        format!("FD-FeLMS-W({})", self.weights.len())
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn run_pass(&mut self, scenario: &Scenario) -> Result<RunReport> {
        let l = self.weights.len();
        let fft = BlockFft::new(2 * l);
        let n_total = scenario.len();
        let plant = &scenario.plant;
        let s = plant.secondary.taps();
        let delay = s.len() - 1;
        let s_rev: Vec<f64> = s.iter().rev().copied().collect();
        let s_power = secondary_power_response(s, &fft);
        let mut ul = DelayLine::new(s.len());
        let mut el = DelayLine::new(s.len());
        let mut guard = DivergenceGuard::new(&scenario.disturbance);
        let mut error = vec![0.0; n_total];
        let mut weights_spec = fft.forward(&self.weights);
        let mut diverged = false;
        let mut processed = n_total;

        'blocks: for start in (0..n_total).step_by(l) {
            let y = block_control(&fft, &scenario.x.samples, start, &weights_spec);
            let mut fe_block = vec![0.0; 2 * l];
            for j in 0..l.min(n_total - start) {
                let n = start + j;
                ul.push(sef_unchecked(y[j], plant.eta2));
                let e = scenario.disturbance[n] + dot(s, ul.window());
                error[n] = e;
                if guard.exceeded(e) {
                    diverged = true;
                    processed = n + 1;
                    break 'blocks;
                }
                el.push(e);
                // Adjoint-filtered error, delayed by len(s) - 1.
                fe_block[l + j] = dot(&s_rev, el.window());
            }
            let x_spec = fft.forward(&window(
                &scenario.x.samples,
                start as isize - delay as isize - l as isize,
                2 * l,
            ));
            let fresh = x_spec.iter().zip(&s_power).map(|(c, sp)| c.norm_sqr() * sp).collect();
            let p = update_power(&mut self.power, fresh, self.forgetting);
            let fe_spec = fft.forward(&fe_block);
            let cross: Vec<Complex64> = x_spec.iter().zip(&fe_spec).map(|(x, e)| x.conj() * e).collect();
            let grad = causal_gradient(&fft, cross, Some(p));
            for (acc, g) in self.pending.iter_mut().zip(&grad[..l]) {
                *acc += g;
            }
            self.pending_frames += 1;
            if self.pending_frames == self.update_frames {
                for (w, g) in self.weights.iter_mut().zip(&self.pending) {
                    *w -= self.mu * g;
                }
                self.pending.iter_mut().for_each(|g| *g = 0.0);
                self.pending_frames = 0;
                weights_spec = fft.forward(&self.weights);
            }
        }
        Ok(finish_report(scenario, error, processed, diverged, &self.weights))
    }
}

pub fn fd_fxnlms_run(
    x: &Signal,
    plant: &PlantModel,
    taps: usize,
    mu: f64,
    block: usize,
    forgetting: f64,
) -> Result<RunReport> {
    if block != taps {
        return Err(AncError::Config(format!("block size {block} must equal filter length {taps}")));
    }
    FdFxnlms::new(taps, mu, forgetting)?.run_pass(&Scenario::new(x, plant)?)
}

pub fn fd_felms_whitened_run(
    x: &Signal,
    plant: &PlantModel,
    taps: usize,
    mu: f64,
    block: usize,
    forgetting: f64,
    update_frames: usize,
) -> Result<RunReport> {
    if block != taps {
        return Err(AncError::Config(format!("block size {block} must equal filter length {taps}")));
    }
    FdFelmsWhitened::new(taps, mu, forgetting, update_frames)?.run_pass(&Scenario::new(x, plant)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::Eta2;
    use crate::adaptive::TdFxlms;
    use crate::signal::FirCoeffs;
    use rand::{Rng, SeedableRng};

    fn noise(n: usize, seed: u64) -> Signal {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Signal::new((0..n).map(|_| rng.gen_range(-0.5..0.5)).collect(), 16000.0).unwrap()
    }

    fn small_plant() -> PlantModel {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let mut p: Vec<f64> = (0..40).map(|i| rng.gen_range(-0.2..0.2) * (-(i as f64) / 10.0).exp()).collect();
        p[12] += 1.0;
        let mut s: Vec<f64> = (0..16).map(|i| rng.gen_range(-0.2..0.2) * (-(i as f64) / 5.0).exp()).collect();
        s[3] += 1.0;
        PlantModel::new(FirCoeffs::new(p).unwrap(), FirCoeffs::new(s).unwrap(), Eta2::Linear).unwrap()
    }

    #[test]
    fn zero_reference_gives_zero_weights() {
        let x = Signal::zeros(2048, 16000.0);
        let plant = small_plant();
        let r = fd_fxnlms_run(&x, &plant, 64, 0.1, 64, 0.9).unwrap();
        assert!(r.final_weights.iter().all(|&w| w == 0.0));
        let r = fd_felms_whitened_run(&x, &plant, 64, 0.1, 64, 0.9, 2).unwrap();
        assert!(r.final_weights.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn config_errors() {
        let x = noise(256, 1);
        let plant = small_plant();
        assert!(matches!(fd_fxnlms_run(&x, &plant, 48, 0.1, 48, 0.9), Err(AncError::Config(_))));
        assert!(matches!(fd_fxnlms_run(&x, &plant, 64, 0.1, 32, 0.9), Err(AncError::Config(_))));
        assert!(matches!(fd_felms_whitened_run(&x, &plant, 64, 0.1, 64, 0.9, 0), Err(AncError::Config(_))));
    }

    #[test]
    fn block_control_matches_direct_filter() {
        let x = noise(300, 2).samples;
        let w: Vec<f64> = noise(32, 3).samples;
        let fft = BlockFft::new(64);
        let spec = fft.forward(&w);
        let direct = crate::dsp::direct_convolve_slice(&x, &w);
        for start in (0..288).step_by(32) {
            let y = block_control(&fft, &x, start, &spec);
            for j in 0..32 {
                assert!((y[j] - direct[start + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unnormalized_block_matches_summed_micro_updates() {
        // One block with a tiny step: the block update equals the sum of the
        // sample-by-sample FxLMS updates to first order in μ.
        let l = 64;
        let x = noise(4 * l, 4);
        let plant = small_plant();
        let mu = 1e-7;
        // Warm both filters up with identical non-zero weights.
        let w0: Vec<f64> = noise(l, 5).samples.iter().map(|v| 0.1 * v).collect();
        let scenario = Scenario::new(&x, &plant).unwrap();
        let mut block = FdFxnlms::unnormalized(l, mu).unwrap();
        block.weights = w0.clone();
        let mut td = TdFxlms::with_weights(w0.clone(), mu).unwrap();
        // Process exactly one block through each.
        let one_block = Scenario {
            x: x.with_samples(x.samples[..l].to_vec()),
            plant: plant.clone(),
            disturbance: scenario.disturbance[..l].to_vec(),
            filtered_reference: scenario.filtered_reference[..l].to_vec(),
        };
        block.run_pass(&one_block).unwrap();
        td.run_pass(&one_block).unwrap();
        let db: Vec<f64> = block.weights.iter().zip(&w0).map(|(a, b)| a - b).collect();
        let dt: Vec<f64> = td.weights().iter().zip(&w0).map(|(a, b)| a - b).collect();
        let num: f64 = db.iter().zip(&dt).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = dt.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(num / den <= 1e-3, "relative difference {}", num / den);
    }
}
