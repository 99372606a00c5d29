//! Least-squares (Wiener) control filter from the normal equations.
//!
//! With `r = s∗x` and `d = p∗x`, the optimal length-`L` filter solves the
//! symmetric Toeplitz system `(Φ + εI)·w = −φ`, where `Φ` holds the
//! autocorrelation of `r` and `φ` the cross-correlation of `d` with `r`.
//! The loudspeaker is treated as linear for the design.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::Scenario;
use crate::acoustics::PlantModel;
use crate::error::{AncError, Result};
use crate::signal::{FirCoeffs, Signal};

/// Diagonal loading relative to the zero-lag autocorrelation.
pub const DIAGONAL_LOADING: f64 = 1e-8;

/// A Wiener solution with its conditioning diagnostics.
#[derive(Debug, Clone)]
pub struct WienerDesign {
    pub filter: FirCoeffs,
    /// Smallest normalized prediction-error power met during the recursion;
    /// its inverse bounds the condition number from below.
    pub min_prediction_error: f64,
}

/// First `lags` values of `Σ_n a(n)·b(n−k)` for `k ≥ 0`.
fn correlate(a: &[f64], b: &[f64], lags: usize) -> Vec<f64> {
    let n = a.len().max(b.len());
    let size = (n + lags).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let load = |v: &[f64]| {
        let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        buf.resize(size, Complex64::new(0.0, 0.0));
        fwd.process(&mut buf);
        buf
    };
    let fa = load(a);
    let fb = load(b);
    let mut prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y.conj()).collect();
    inv.process(&mut prod);
    prod[..lags].iter().map(|c| c.re / size as f64).collect()
}

/// Solves `T·x = b` for the symmetric positive-definite Toeplitz matrix
/// with first column `t`. Returns the solution and the smallest normalized
/// prediction-error power (`β` in the Levinson recursion).
pub fn levinson_solve(t: &[f64], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = t.len();
    if n == 0 || b.len() != n {
        return Err(AncError::Shape(format!("Toeplitz column {} vs right-hand side {}", n, b.len())));
    }
    let t0 = t[0];
    if !(t0 > 0.0) {
        return Err(AncError::Numerical(format!("Toeplitz diagonal {t0} is not positive")));
    }
    let r: Vec<f64> = t[1..].iter().map(|v| v / t0).collect();
    let rhs: Vec<f64> = b.iter().map(|v| v / t0).collect();
    let mut x = vec![rhs[0]];
    if n == 1 {
        return Ok((x, 1.0));
    }
    let mut y = vec![-r[0]];
    let mut alpha = -r[0];
    let mut beta = 1.0_f64;
    let mut min_beta = 1.0_f64;
    for k in 1..n {
        beta *= 1.0 - alpha * alpha;
        min_beta = min_beta.min(beta);
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(AncError::Numerical(format!(
                "Toeplitz system is singular at order {k} (prediction error {beta:e})"
            )));
        }
        let proj: f64 = (0..k).map(|i| r[i] * x[k - 1 - i]).sum();
        let mu = (rhs[k] - proj) / beta;
        let new_x: Vec<f64> = (0..k).map(|i| x[i] + mu * y[k - 1 - i]).collect();
        x = new_x;
        x.push(mu);
        if k < n - 1 {
            let proj: f64 = (0..k).map(|i| r[i] * y[k - 1 - i]).sum();
            alpha = (-r[k] - proj) / beta;
            let new_y: Vec<f64> = (0..k).map(|i| y[i] + alpha * y[k - 1 - i]).collect();
            y = new_y;
            y.push(alpha);
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(AncError::Numerical("Levinson solution is not finite".into()));
    }
    Ok((x, min_beta))
}

pub fn wiener_design_with(scenario: &Scenario, taps: usize) -> Result<WienerDesign> {
    if taps == 0 {
        return Err(AncError::Config("Wiener filter needs at least one tap".into()));
    }
    let r = &scenario.filtered_reference;
    let mut auto = correlate(r, r, taps);
    let cross = correlate(&scenario.disturbance, r, taps);
    if !(auto[0] > 0.0) {
        return Err(AncError::Numerical("filtered reference has zero energy".into()));
    }
    auto[0] *= 1.0 + DIAGONAL_LOADING;
    let rhs: Vec<f64> = cross.iter().map(|v| -v).collect();
    let (w, min_prediction_error) = levinson_solve(&auto, &rhs).map_err(|e| match e {
        AncError::Numerical(msg) => AncError::Numerical(format!(
            "Wiener design rank-deficient with loading {DIAGONAL_LOADING:e}: {msg}"
        )),
        other => other,
    })?;
    Ok(WienerDesign {
        filter: FirCoeffs::new(w)?,
        min_prediction_error,
    })
}

/// Least-squares control filter of `taps` taps for this reference and plant.
pub fn wiener_design(x: &Signal, plant: &PlantModel, taps: usize) -> Result<FirCoeffs> {
    Ok(wiener_design_with(&Scenario::new(x, plant)?, taps)?.filter)
}
