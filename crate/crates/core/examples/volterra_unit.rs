//! Shows that one rank-1 quadratic unit equals a dense second-order Volterra
//! filter whose kernel is the outer product of its two taps vectors.

use ancsim::wavenet::vnn_quadratic_unit;

fn main() -> ancsim::Result<()> {
    let x: Vec<f64> = (0..16).map(|i| ((i * 7 % 5) as f64 - 2.0) / 2.0).collect();
    let a = [0.5, -0.25, 0.125];
    let b = [1.0, 0.5, 0.0];
    let fast = vnn_quadratic_unit(&x, &a, &b)?;
    let past = |n: usize, k: usize| if k <= n { x[n - k] } else { 0.0 };
    let mut worst = 0.0f64;
    for (n, f) in fast.iter().enumerate() {
        let mut dense = 0.0;
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                dense += ai * bj * past(n, i) * past(n, j);
            }
        }
        worst = worst.max((dense - f).abs());
        println!("n={n:2}  factorized {f:+.6}  dense {dense:+.6}");
    }
    println!("largest difference {worst:.1e}");
    Ok(())
}
