//! Slice activations. The f64 versions use a branch-free exp so that the
//! loops vectorize; accuracy is a few ulp.

use num_traits::Float;

const LOG2E: f64 = std::f64::consts::LOG2_E;
const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
// 1.5·2^52: adding it rounds to an integer held in the low mantissa bits.
const ROUNDER: f64 = 6_755_399_441_055_744.0;

#[inline(always)]
fn exp_core(x: f64) -> f64 {
    // Plain selects (not clamp/min) keep the loop vectorizable.
    let x = if x < -708.0 { -708.0 } else if x > 708.0 { 708.0 } else { x };
    let t = x * LOG2E + ROUNDER;
    let k = t - ROUNDER;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    // Taylor series to r^13; |r| ≤ ln2/2 keeps the remainder below 1e-17.
    let mut p = 1.0 / 6_227_020_800.0;
    for c in [
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        p = p * r + c;
    }
    let bits = t.to_bits().wrapping_sub(ROUNDER.to_bits()).wrapping_add(1023) << 52;
    p * f64::from_bits(bits)
}

pub(crate) trait Scalar: Float + Send + Sync + 'static {
    fn tanh_in_place(v: &mut [Self]);
    fn sigmoid_in_place(v: &mut [Self]);
    /// `C += A·B` on strided views (`m×k` by `k×n`).
    ///
    /// # Safety
    /// Every strided element of the three views must lie inside its buffer.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_acc(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f64 {
    unsafe fn gemm_acc(
        m: usize,
        k: usize,
        n: usize,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, 1.0, c, rsc, csc);
    }

    fn tanh_in_place(v: &mut [f64]) {
        for x in v {
            let a = x.abs();
            let a = if a > 20.0 { 20.0 } else { a };
            let r = 1.0 - 2.0 / (exp_core(2.0 * a) + 1.0);
            *x = if *x < 0.0 { -r } else { r };
        }
    }

    fn sigmoid_in_place(v: &mut [f64]) {
        for x in v {
            *x = 1.0 / (1.0 + exp_core(-*x));
        }
    }
}

impl Scalar for f32 {
    unsafe fn gemm_acc(
        m: usize,
        k: usize,
        n: usize,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, 1.0, c, rsc, csc);
    }

    fn tanh_in_place(v: &mut [f32]) {
        v.iter_mut().for_each(|x| *x = x.tanh());
    }

    fn sigmoid_in_place(v: &mut [f32]) {
        v.iter_mut().for_each(|x| *x = 1.0 / (1.0 + (-*x).exp()));
    }
}
