//! Building blocks shared by inference (any float width) and training.
//!
//! Internally a multichannel sequence is one contiguous row-major matrix
//! (`channels × time`), so every convolution tap is a small matrix product.


use super::vmath::Scalar;
use crate::error::{AncError, Result};

/// Channel-major sequence used by the public helpers: `x[channel][time]`.
pub type Channels<T> = Vec<Vec<T>>;

/// Causal convolution kernel, weights laid out `[out][in][tap]`; tap `k`
/// multiplies the input `k·dilation` samples in the past.
#[derive(Debug, Clone, Copy)]
pub struct ConvKernel<'a, T> {
    pub weights: &'a [T],
    pub bias: Option<&'a [T]>,
    pub out_channels: usize,
    pub in_channels: usize,
    pub taps: usize,
}

impl<T> ConvKernel<'_, T> {
    fn check(&self, what: &str) -> Result<()> {
        if self.taps == 0 || self.out_channels == 0 || self.in_channels == 0 {
            return Err(AncError::Shape(format!("{what}: empty kernel")));
        }
        if self.weights.len() != self.out_channels * self.in_channels * self.taps {
            return Err(AncError::Shape(format!(
                "{what}: {} weights for a {}x{}x{} kernel",
                self.weights.len(),
                self.out_channels,
                self.in_channels,
                self.taps
            )));
        }
        if self.bias.is_some_and(|b| b.len() != self.out_channels) {
            return Err(AncError::Shape(format!("{what}: bias length mismatch")));
        }
        Ok(())
    }
}

/// One gated residual layer viewed from the parameter vector.
#[derive(Debug, Clone, Copy)]
pub struct ResidualLayer<'a, T> {
    pub filter: ConvKernel<'a, T>,
    pub gate: ConvKernel<'a, T>,
    pub residual: ConvKernel<'a, T>,
    pub skip: ConvKernel<'a, T>,
    pub dilation: usize,
}

/// `rows × cols` row-major matrix; rows are channels, columns are samples.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_row(v: &[T]) -> Self {
        Mat {
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
        }
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn into_row(mut self) -> Vec<T> {
        self.data.truncate(self.cols);
        self.data
    }

    fn from_channels(c: &[Vec<T>]) -> Self {
        let cols = c.first().map_or(0, Vec::len);
        Mat {
            rows: c.len(),
            cols,
            data: c.iter().flatten().copied().collect(),
        }
    }

    fn to_channels(&self) -> Channels<T> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn check_channels<T>(x: &[Vec<T>], expected: usize, what: &str) -> Result<()> {
    if x.len() != expected {
        return Err(AncError::Shape(format!("{what}: {} input channels, kernel expects {expected}", x.len())));
    }
    let t = x.first().map_or(0, Vec::len);
    if x.iter().any(|c| c.len() != t) {
        return Err(AncError::Shape(format!("{what}: ragged channels")));
    }
    Ok(())
}

/// Sum with eight independent partial sums so the loop vectorizes.
#[inline]
pub(crate) fn fast_sum(a: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let chunks = a.chunks_exact(8);
    let tail: f64 = chunks.remainder().iter().sum();
    for c in chunks {
        for j in 0..8 {
            acc[j] += c[j];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Unchecked convolution `out = bias + Σ_tap W_tap · shift(x)`.
pub(crate) fn conv_into<T: Scalar>(out: &mut Mat<T>, x: &Mat<T>, k: &ConvKernel<'_, T>, dilation: usize) {
    let n = x.cols;
    debug_assert_eq!(out.cols, n);
    debug_assert_eq!(out.rows, k.out_channels);
    debug_assert_eq!(x.rows, k.in_channels);
    for o in 0..k.out_channels {
        let b = k.bias.map_or(T::zero(), |b| b[o]);
        out.row_mut(o).iter_mut().for_each(|v| *v = b);
    }
    let (cin, taps) = (k.in_channels, k.taps);
    for tap in 0..taps {
        let shift = tap * dilation;
        if shift >= n {
            break;
        }
        // SAFETY: every view stays inside its buffer: rows < channel counts,
        // columns < n − shift after the offset.
        unsafe {
            T::gemm_acc(
                k.out_channels,
                cin,
                n - shift,
                k.weights.as_ptr().add(tap),
                (cin * taps) as isize,
                taps as isize,
                x.data.as_ptr(),
                n as isize,
                1,
                out.data.as_mut_ptr().add(shift),
                n as isize,
                1,
            );
        }
    }
}

pub(crate) fn conv_alloc<T: Scalar>(x: &Mat<T>, k: &ConvKernel<'_, T>, dilation: usize) -> Mat<T> {
    let mut out = Mat::zeros(k.out_channels, x.cols);
    conv_into(&mut out, x, k, dilation);
    out
}

/// Reverse pass of [`conv_into`]: accumulates weight and bias gradients
/// and, optionally, the input gradient.
pub(crate) fn conv_backward(
    gout: &Mat<f64>,
    x: &Mat<f64>,
    k: &ConvKernel<'_, f64>,
    dilation: usize,
    gw: &mut [f64],
    gb: Option<&mut [f64]>,
    gx: Option<&mut Mat<f64>>,
) {
    let n = x.cols;
    let (cout, cin, taps) = (k.out_channels, k.in_channels, k.taps);
    if let Some(gb) = gb {
        for (o, g) in gb.iter_mut().enumerate() {
            *g += fast_sum(gout.row(o));
        }
    }
    let mut gx = gx;
    for tap in 0..taps {
        let shift = tap * dilation;
        if shift >= n {
            break;
        }
        // SAFETY: as in conv_into; the transposed views swap strides only.
        unsafe {
            // gW[o][i][tap] += Σ_t g[o][t + shift]·x[i][t]
            f64::gemm_acc(
                cout,
                n - shift,
                cin,
                gout.data.as_ptr().add(shift),
                n as isize,
                1,
                x.data.as_ptr(),
                1,
                n as isize,
                gw.as_mut_ptr().add(tap),
                (cin * taps) as isize,
                taps as isize,
            );
            // gx[i][t] += Σ_o W[o][i][tap]·g[o][t + shift]
            if let Some(gx) = gx.as_deref_mut() {
                f64::gemm_acc(
                    cin,
                    cout,
                    n - shift,
                    k.weights.as_ptr().add(tap),
                    taps as isize,
                    (cin * taps) as isize,
                    gout.data.as_ptr().add(shift),
                    n as isize,
                    1,
                    gx.data.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        }
    }
}

/// `out_o(n) = b_o + Σ_i Σ_k W[o][i][k]·x_i(n − k·dilation)`, zero history.
#[allow(private_bounds)]
pub fn causal_dilated_conv<T: Scalar>(x: &[Vec<T>], kernel: &ConvKernel<'_, T>, dilation: usize) -> Result<Channels<T>> {
    if dilation < 1 {
        return Err(AncError::Config("dilation must be at least 1".into()));
    }
    kernel.check("causal_dilated_conv")?;
    check_channels(x, kernel.in_channels, "causal_dilated_conv")?;
    Ok(conv_alloc(&Mat::from_channels(x), kernel, dilation).to_channels())
}

/// Outputs of one gated layer: residual, skip, `tanh(f)` and `σ(g)`.
pub(crate) struct GatedOut<T> {
    pub residual: Mat<T>,
    pub skip: Mat<T>,
    pub tf: Mat<T>,
    pub sg: Mat<T>,
}

pub(crate) fn gated_forward<T: Scalar>(x: &Mat<T>, layer: &ResidualLayer<'_, T>) -> GatedOut<T> {
    let mut tf = conv_alloc(x, &layer.filter, layer.dilation);
    let mut sg = conv_alloc(x, &layer.gate, layer.dilation);
    T::tanh_in_place(&mut tf.data);
    T::sigmoid_in_place(&mut sg.data);
    let z = Mat {
        rows: tf.rows,
        cols: tf.cols,
        data: tf.data.iter().zip(&sg.data).map(|(&a, &b)| a * b).collect(),
    };
    let mut residual = conv_alloc(&z, &layer.residual, 1);
    residual.data.iter_mut().zip(&x.data).for_each(|(a, &b)| *a = *a + b);
    let skip = conv_alloc(&z, &layer.skip, 1);
    GatedOut { residual, skip, tf, sg }
}

/// `z = tanh(W_f ∗ x) ⊙ σ(W_g ∗ x)`; returns `(x + W_r z, W_s z)`.
#[allow(private_bounds)]
pub fn gated_residual_block<T: Scalar>(x: &[Vec<T>], layer: &ResidualLayer<'_, T>) -> Result<(Channels<T>, Channels<T>)> {
    if layer.dilation < 1 {
        return Err(AncError::Config("dilation must be at least 1".into()));
    }
    let width = layer.filter.in_channels;
    for (k, what) in [
        (&layer.filter, "filter"),
        (&layer.gate, "gate"),
        (&layer.residual, "residual"),
        (&layer.skip, "skip"),
    ] {
        k.check(what)?;
    }
    let ok = layer.gate.in_channels == width
        && layer.filter.out_channels == width
        && layer.gate.out_channels == width
        && layer.residual.in_channels == width
        && layer.residual.out_channels == width
        && layer.skip.in_channels == width
        && layer.residual.taps == 1
        && layer.skip.taps == 1;
    if !ok {
        return Err(AncError::Shape("gated_residual_block: inconsistent channel widths".into()));
    }
    check_channels(x, width, "gated_residual_block")?;
    let out = gated_forward(&Mat::from_channels(x), layer);
    Ok((out.residual.to_channels(), out.skip.to_channels()))
}

pub(crate) fn single<T>(k: &[T]) -> ConvKernel<'_, T> {
    ConvKernel {
        weights: k,
        bias: None,
        out_channels: 1,
        in_channels: 1,
        taps: k.len(),
    }
}

/// Rank-1 second-order Volterra term `(a ∗ x)(n)·(b ∗ x)(n)`.
#[allow(private_bounds)]
pub fn vnn_quadratic_unit<T: Scalar>(x: &[T], a: &[T], b: &[T]) -> Result<Vec<T>> {
    if a.is_empty() || b.is_empty() {
        return Err(AncError::Shape("vnn_quadratic_unit: empty kernel".into()));
    }
    let xs = Mat::from_row(x);
    let pa = conv_alloc(&xs, &single(a), 1).into_row();
    let pb = conv_alloc(&xs, &single(b), 1).into_row();
    Ok(pa.iter().zip(&pb).map(|(&u, &v)| u * v).collect())
}
