//! Prints the loudspeaker response f(y) for several nonlinearity strengths.

use ancsim::acoustics::{sef, Eta2};

fn main() -> ancsim::Result<()> {
    let grid = [Eta2::Linear, Eta2::finite(2.0)?, Eta2::finite(0.5)?, Eta2::finite(0.1)?];
    print!("{:>6}", "y");
    for e in &grid {
        print!("  {:>9}", format!("eta2={e}"));
    }
    println!();
    for i in 0..=12 {
        let y = -3.0 + 0.5 * i as f64;
        print!("{y:6.2}");
        for &e in &grid {
            print!("  {:9.4}", sef(y, e)?);
        }
        println!();
    }
    for &e in &grid[1..] {
        println!("eta2={e}: output saturates at {:.4}", e.saturation_limit());
    }
    Ok(())
}
