//! End-to-end forward pass and reverse-mode gradients through the plant.

use super::loss::loss_and_grad;
use super::ops::{conv_alloc, conv_backward, gated_forward, Mat, ResidualLayer};
use super::params::{ConvSlot, Layout, WaveNetVnnParams};
use super::vmath::Scalar;
use crate::acoustics::{sef_prime_unchecked, sef_unchecked, PlantModel};
use crate::dsp::{adjoint_convolve_slice, direct_convolve_slice, AWeighting};
use crate::error::{AncError, Result};
use crate::signal::Signal;

/// Activations kept for the reverse pass.
struct Cache<T> {
    input: Mat<T>,
    /// Input of every residual layer.
    hs: Vec<Mat<T>>,
    tf: Vec<Mat<T>>,
    sg: Vec<Mat<T>>,
    /// tanh outputs around the three post convolutions.
    acts: Vec<Mat<T>>,
    qa: Vec<Vec<T>>,
    qb: Vec<Vec<T>>,
}

impl<T: Scalar> Cache<T> {
    fn new() -> Self {
        Cache {
            input: Mat::zeros(0, 0),
            hs: Vec::new(),
            tf: Vec::new(),
            sg: Vec::new(),
            acts: Vec::new(),
            qa: Vec::new(),
            qb: Vec::new(),
        }
    }
}

fn forward_impl<T: Scalar>(x: &[T], data: &[T], layout: &Layout, mut cache: Option<&mut Cache<T>>) -> Result<Vec<T>> {
    let n = x.len();
    let input = Mat::from_row(x);
    let mut h = conv_alloc(&input, &layout.input.kernel(data), 1);
    if let Some(c) = cache.as_deref_mut() {
        c.input = input;
    }
    let mut skip_sum = Mat::zeros(layout.post[0].cin, n);
    for (i, slot) in layout.layers.iter().enumerate() {
        let layer = ResidualLayer {
            filter: slot.filter.kernel(data),
            gate: slot.gate.kernel(data),
            residual: slot.residual.kernel(data),
            skip: slot.skip.kernel(data),
            dilation: slot.dilation,
        };
        let out = gated_forward(&h, &layer);
        if !out.residual.all_finite() || !out.skip.all_finite() {
            return Err(AncError::Numerical(format!("non-finite activation in residual layer {i}")));
        }
        skip_sum.data.iter_mut().zip(&out.skip.data).for_each(|(a, &b)| *a = *a + b);
        let prev = std::mem::replace(&mut h, out.residual);
        if let Some(c) = cache.as_deref_mut() {
            c.hs.push(prev);
            c.tf.push(out.tf);
            c.sg.push(out.sg);
        }
    }
    let mut a = skip_sum;
    T::tanh_in_place(&mut a.data);
    for (j, slot) in layout.post.iter().enumerate() {
        let mut next = conv_alloc(&a, &slot.kernel(data), 1);
        T::tanh_in_place(&mut next.data);
        if !next.all_finite() {
            return Err(AncError::Numerical(format!("non-finite activation in post convolution {j}")));
        }
        let prev = std::mem::replace(&mut a, next);
        if let Some(c) = cache.as_deref_mut() {
            c.acts.push(prev);
        }
    }
    let u = a;
    let mut y = conv_alloc(&u, &layout.linear.kernel(data), 1).into_row();
    for (qa, qb) in &layout.quadratic {
        let pa = conv_alloc(&u, &qa.kernel(data), 1).into_row();
        let pb = conv_alloc(&u, &qb.kernel(data), 1).into_row();
        y.iter_mut().zip(pa.iter().zip(&pb)).for_each(|(o, (&p, &q))| *o = *o + p * q);
        if let Some(c) = cache.as_deref_mut() {
            c.qa.push(pa);
            c.qb.push(pb);
        }
    }
    if let Some(c) = cache.as_deref_mut() {
        c.acts.push(u);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(AncError::Numerical("non-finite control signal at the VNN output".into()));
    }
    Ok(y)
}

/// Control signal for a reference signal, computed in double precision.
pub fn model_forward(x: &Signal, params: &WaveNetVnnParams) -> Result<Signal> {
    let y = forward_impl(&x.samples, params.as_slice(), params.layout(), None)?;
    Ok(x.with_samples(y))
}

/// Same network evaluated entirely in single precision.
pub fn model_forward_f32(x: &[f32], params: &WaveNetVnnParams) -> Result<Vec<f32>> {
    let data: Vec<f32> = params.as_slice().iter().map(|&v| v as f32).collect();
    forward_impl(x, &data, params.layout(), None)
}

fn slot_grads<'g>(grad: &'g mut [f64], slot: &ConvSlot) -> (&'g mut [f64], Option<&'g mut [f64]>) {
    // Bias always follows the weights directly in the layout.
    let (w, rest) = grad[slot.w..].split_at_mut(slot.wlen());
    let b = slot.b.map(|b| {
        debug_assert_eq!(b, slot.w + slot.wlen());
        &mut rest[..slot.cout]
    });
    (w, b)
}

fn backprop(gy: &[f64], data: &[f64], layout: &Layout, cache: &Cache<f64>, grad: &mut [f64]) {
    let n = gy.len();
    let u = cache.acts.last().expect("cache");
    let row = |v: Vec<f64>| Mat { rows: 1, cols: n, data: v };
    let mut gu = Mat::zeros(u.rows, n);
    {
        let (gw, gb) = slot_grads(grad, &layout.linear);
        conv_backward(&row(gy.to_vec()), u, &layout.linear.kernel(data), 1, gw, gb, Some(&mut gu));
    }
    for (q, (qa, qb)) in layout.quadratic.iter().enumerate() {
        let ga = row(gy.iter().zip(&cache.qb[q]).map(|(g, b)| g * b).collect());
        let gb_ = row(gy.iter().zip(&cache.qa[q]).map(|(g, a)| g * a).collect());
        let (gw, _) = slot_grads(grad, qa);
        conv_backward(&ga, u, &qa.kernel(data), 1, gw, None, Some(&mut gu));
        let (gw, _) = slot_grads(grad, qb);
        conv_backward(&gb_, u, &qb.kernel(data), 1, gw, None, Some(&mut gu));
    }

    let through_tanh = |g: &mut Mat<f64>, a: &Mat<f64>| {
        g.data.iter_mut().zip(&a.data).for_each(|(g, a)| *g *= 1.0 - a * a);
    };
    // Post stack, walked backwards: acts[j] feeds post[j], acts[3] = u.
    let mut g_out = gu;
    for j in (0..3).rev() {
        through_tanh(&mut g_out, &cache.acts[j + 1]);
        let slot = &layout.post[j];
        let mut g_in = Mat::zeros(slot.cin, n);
        let (gw, gb) = slot_grads(grad, slot);
        conv_backward(&g_out, &cache.acts[j], &slot.kernel(data), 1, gw, gb, Some(&mut g_in));
        g_out = g_in;
    }
    let mut g_skip = g_out;
    through_tanh(&mut g_skip, &cache.acts[0]);

    let width = layout.input.cout;
    // The last residual output is not consumed.
    let mut g_h = Mat::zeros(width, n);
    let mut gz = Mat::zeros(width, n);
    for (i, slot) in layout.layers.iter().enumerate().rev() {
        let h = &cache.hs[i];
        let (tf, sg) = (&cache.tf[i], &cache.sg[i]);
        let z = Mat {
            rows: width,
            cols: n,
            data: tf.data.iter().zip(&sg.data).map(|(p, q)| p * q).collect(),
        };
        gz.data.iter_mut().for_each(|v| *v = 0.0);
        {
            let (gw, gb) = slot_grads(grad, &slot.residual);
            conv_backward(&g_h, &z, &slot.residual.kernel(data), 1, gw, gb, Some(&mut gz));
        }
        {
            let (gw, gb) = slot_grads(grad, &slot.skip);
            conv_backward(&g_skip, &z, &slot.skip.kernel(data), 1, gw, gb, Some(&mut gz));
        }
        let mut gf = gz.clone();
        let mut gg = z;
        for (((f, g), &a), (&s, &dz)) in gf
            .data
            .iter_mut()
            .zip(gg.data.iter_mut())
            .zip(&tf.data)
            .zip(sg.data.iter().zip(&gz.data))
        {
            *f = dz * s * (1.0 - a * a);
            *g = dz * a * s * (1.0 - s);
        }
        // Residual identity path: g_h carries straight through.
        {
            let (gw, gb) = slot_grads(grad, &slot.filter);
            conv_backward(&gf, h, &slot.filter.kernel(data), slot.dilation, gw, gb, Some(&mut g_h));
        }
        {
            let (gw, gb) = slot_grads(grad, &slot.gate);
            conv_backward(&gg, h, &slot.gate.kernel(data), slot.dilation, gw, gb, Some(&mut g_h));
        }
    }
    let (gw, gb) = slot_grads(grad, &layout.input);
    conv_backward(&g_h, &cache.input, &layout.input.kernel(data), 1, gw, gb, None);
}

/// Loss and parameter gradient for one window. `d` is the disturbance for
/// the same samples as `x`; only samples from `loss_from` on enter the loss,
/// the earlier ones serve as warm-up history for the network and the plant.
pub(crate) fn backward_window(
    x: &[f64],
    d: &[f64],
    loss_from: usize,
    plant: &PlantModel,
    params: &WaveNetVnnParams,
    aw: &AWeighting,
) -> Result<(f64, Vec<f64>)> {
    if x.len() != d.len() || loss_from >= x.len() {
        return Err(AncError::Shape(format!(
            "training window: {} reference vs {} disturbance samples, loss from {loss_from}",
            x.len(),
            d.len()
        )));
    }
    let data = params.as_slice();
    let layout = params.layout();
    let mut cache = Cache::new();
    let y = forward_impl(x, data, layout, Some(&mut cache))?;
    let driven: Vec<f64> = y.iter().map(|&v| sef_unchecked(v, plant.eta2)).collect();
    let anti = direct_convolve_slice(&driven, plant.secondary.taps());
    let e: Vec<f64> = d.iter().zip(&anti).map(|(a, b)| a + b).collect();
    let (loss, ge_tail) = loss_and_grad(&e[loss_from..], &d[loss_from..], aw);
    let mut ge = vec![0.0; x.len()];
    ge[loss_from..].copy_from_slice(&ge_tail);
    let gv = adjoint_convolve_slice(&ge, plant.secondary.taps());
    let gy: Vec<f64> = gv.iter().zip(&y).map(|(g, &v)| g * sef_prime_unchecked(v, plant.eta2)).collect();
    let mut grad = vec![0.0; params.len()];
    backprop(&gy, data, layout, &cache, &mut grad);
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(AncError::Numerical(format!("non-finite gradient for {}", params.name_of(i))));
    }
    Ok((loss, grad))
}

/// Loss of the closed loop `e = p∗x + s∗f(model(x))` and its gradient with
/// respect to every parameter (flat, in layout order).
pub fn model_backward(x: &Signal, plant: &PlantModel, params: &WaveNetVnnParams) -> Result<(f64, Vec<f64>)> {
    let aw = AWeighting::new(x.sample_rate)?;
    let d = plant.disturbance(&x.samples);
    backward_window(&x.samples, &d, 0, plant, params, &aw)
}

/// Closed-loop residual for a trained model.
pub fn model_error(x: &Signal, plant: &PlantModel, params: &WaveNetVnnParams) -> Result<Signal> {
    let y = model_forward(x, params)?;
    crate::acoustics::plant_error(x, &y, plant)
}
