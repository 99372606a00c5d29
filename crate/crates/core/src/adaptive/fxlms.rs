//! Sample-by-sample filtered-reference LMS: the linear TD-FxLMS and the
//! tanh-slope-compensated THF-FxLMS.

use super::{dot, finish_report, AdaptiveController, DelayLine, DivergenceGuard, RunReport, Scenario};
use crate::acoustics::{sef_unchecked, PlantModel};
use crate::error::{AncError, Result};
use crate::signal::Signal;

fn check_args(taps: usize, mu: f64) -> Result<()> {
    if taps == 0 {
        return Err(AncError::Config("control filter needs at least one tap".into()));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(AncError::Config(format!("step size {mu} must be positive")));
    }
    Ok(())
}

/// Time-domain FxLMS, `w(n+1) = w(n) − μ·e(n)·r(n)`.
#[derive(Debug, Clone)]
pub struct TdFxlms {
    weights: Vec<f64>,
    mu: f64,
}

impl TdFxlms {
    pub fn new(taps: usize, mu: f64) -> Result<Self> {
        check_args(taps, mu)?;
        Ok(TdFxlms {
            weights: vec![0.0; taps],
            mu,
        })
    }

    pub fn with_weights(weights: Vec<f64>, mu: f64) -> Result<Self> {
        check_args(weights.len(), mu)?;
        Ok(TdFxlms { weights, mu })
    }

    pub fn step_size(&self) -> f64 {
        self.mu
    }

    /// One gradient step given the error sample and the filtered-reference
    /// vector (newest first).
    #[inline]
    pub fn update(&mut self, e: f64, r: &[f64]) {
        let g = self.mu * e;
        for (w, &rv) in self.weights.iter_mut().zip(r) {
            *w -= g * rv;
        }
    }
}

impl AdaptiveController for TdFxlms {
    fn label(&self) -> String {
        format!("TD-FxLMS({})", self.weights.len())
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn run_pass(&mut self, scenario: &Scenario) -> Result<RunReport> {
        let taps = self.weights.len();
        let plant = &scenario.plant;
        let s = plant.secondary.taps();
        let mut xl = DelayLine::new(taps);
        let mut rl = DelayLine::new(taps);
        let mut ul = DelayLine::new(s.len());
        let mut guard = DivergenceGuard::new(&scenario.disturbance);
        let mut error = vec![0.0; scenario.len()];
        let mut processed = scenario.len();
        let mut diverged = false;
        for n in 0..scenario.len() {
            xl.push(scenario.x.samples[n]);
            rl.push(scenario.filtered_reference[n]);
            let y = dot(&self.weights, xl.window());
            ul.push(sef_unchecked(y, plant.eta2));
            let e = scenario.disturbance[n] + dot(s, ul.window());
            error[n] = e;
            if guard.exceeded(e) {
                diverged = true;
                processed = n + 1;
                break;
            }
            self.update(e, rl.window());
        }
        Ok(finish_report(scenario, error, processed, diverged, &self.weights))
    }
}

/// THF-FxLMS: the reference is scaled sample-by-sample by the slope
/// `sech²(y/λ)` of a `λ·tanh(y/λ)` loudspeaker model before it is filtered
/// by the secondary path.
#[derive(Debug, Clone)]
pub struct ThfFxlms {
    weights: Vec<f64>,
    mu: f64,
    lambda: f64,
}

impl ThfFxlms {
    pub fn new(taps: usize, mu: f64, lambda: f64) -> Result<Self> {
        check_args(taps, mu)?;
        if !(lambda > 0.0) {
            return Err(AncError::Config(format!("saturation parameter {lambda} must be positive")));
        }
        Ok(ThfFxlms {
            weights: vec![0.0; taps],
            mu,
            lambda,
        })
    }

    /// `λ = √(η²·π/2)`, so the tanh model saturates where the SEF does.
    pub fn default_lambda(plant: &PlantModel) -> f64 {
        plant.eta2.saturation_limit()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl AdaptiveController for ThfFxlms {
    fn label(&self) -> String {
        format!("THF-FxLMS({})", self.weights.len())
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn run_pass(&mut self, scenario: &Scenario) -> Result<RunReport> {
        let taps = self.weights.len();
        let plant = &scenario.plant;
        let s = plant.secondary.taps();
        let mut xl = DelayLine::new(taps);
        let mut rl = DelayLine::new(taps);
        let mut ul = DelayLine::new(s.len());
        let mut scaled_x = DelayLine::new(s.len());
        let mut guard = DivergenceGuard::new(&scenario.disturbance);
        let mut error = vec![0.0; scenario.len()];
        let mut processed = scenario.len();
        let mut diverged = false;
        for n in 0..scenario.len() {
            let xn = scenario.x.samples[n];
            xl.push(xn);
            let y = dot(&self.weights, xl.window());
            let slope = if self.lambda.is_finite() {
                let c = (y / self.lambda).cosh();
                1.0 / (c * c)
            } else {
                1.0
            };
            scaled_x.push(slope * xn);
            rl.push(dot(s, scaled_x.window()));
            ul.push(sef_unchecked(y, plant.eta2));
            let e = scenario.disturbance[n] + dot(s, ul.window());
            error[n] = e;
            if guard.exceeded(e) {
                diverged = true;
                processed = n + 1;
                break;
            }
            let g = self.mu * e;
            for (w, &rv) in self.weights.iter_mut().zip(rl.window()) {
                *w -= g * rv;
            }
        }
        Ok(finish_report(scenario, error, processed, diverged, &self.weights))
    }
}

pub fn td_fxlms_run(x: &Signal, plant: &PlantModel, taps: usize, mu: f64) -> Result<RunReport> {
    TdFxlms::new(taps, mu)?.run_pass(&Scenario::new(x, plant)?)
}

pub fn thf_fxlms_run(x: &Signal, plant: &PlantModel, taps: usize, mu: f64, lambda: f64) -> Result<RunReport> {
    ThfFxlms::new(taps, mu, lambda)?.run_pass(&Scenario::new(x, plant)?)
}
