use crate::dsp::AWeighting;
use crate::error::{AncError, Result};

/// Keeps both log-ratios finite and differentiable when `e → 0`.
pub const LOSS_DELTA: f64 = 1e-12;

const HALF_DB: f64 = 5.0 / std::f64::consts::LN_10;

/// Mean of the plain and A-weighted power ratios in dB, with its gradient
/// with respect to `e`. No check on `Σd²`.
pub(crate) fn loss_and_grad(e: &[f64], d: &[f64], aw: &AWeighting) -> (f64, Vec<f64>) {
    let ee = e.iter().map(|v| v * v).sum::<f64>() + LOSS_DELTA;
    let ed = d.iter().map(|v| v * v).sum::<f64>() + LOSS_DELTA;
    let ae_sig = aw.apply(e);
    let ae = ae_sig.iter().map(|v| v * v).sum::<f64>() + LOSS_DELTA;
    let ad = aw.apply(d).iter().map(|v| v * v).sum::<f64>() + LOSS_DELTA;
    let loss = HALF_DB * ((ee / ed).ln() + (ae / ad).ln());
    let back = aw.adjoint(&ae_sig);
    let grad = e
        .iter()
        .zip(&back)
        .map(|(&v, &b)| HALF_DB * 2.0 * (v / ee + b / ae))
        .collect();
    (loss, grad)
}

fn check(e: &[f64], d: &[f64]) -> Result<()> {
    if e.len() != d.len() {
        return Err(AncError::Shape(format!("anc_loss: length mismatch ({} vs {})", e.len(), d.len())));
    }
    if d.iter().all(|&v| v == 0.0) {
        return Err(AncError::DegenerateReference);
    }
    Ok(())
}

/// `0.5·[10·log10((Σe²+δ)/(Σd²+δ)) + 10·log10((Σ(a∗e)²+δ)/(Σ(a∗d)²+δ))]`.
pub fn anc_loss(e: &[f64], d: &[f64], aw: &AWeighting) -> Result<f64> {
    check(e, d)?;
    Ok(loss_and_grad(e, d, aw).0)
}

pub fn anc_loss_grad(e: &[f64], d: &[f64], aw: &AWeighting) -> Result<(f64, Vec<f64>)> {
    check(e, d)?;
    Ok(loss_and_grad(e, d, aw))
}
