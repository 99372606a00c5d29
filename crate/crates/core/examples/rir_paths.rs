//! Simulates the primary and secondary paths of the default room and
//! reports their direct-path delay and reverberation time.

use ancsim::acoustics::{schroeder_curve_db, simulate_rir};
use ancsim::harness::RoomConfig;

fn t60_from_decay(h: &[f64], fs: f64) -> f64 {
    // Fit the -5..-25 dB part of the Schroeder curve and extrapolate to -60.
    let curve = schroeder_curve_db(h);
    let pick = |level: f64| curve.iter().position(|&v| v <= level).unwrap_or(curve.len() - 1) as f64 / fs;
    3.0 * (pick(-25.0) - pick(-5.0))
}

fn main() -> ancsim::Result<()> {
    let room = RoomConfig::default();
    for (name, spec) in [("primary", room.primary_room()), ("secondary", room.secondary_room())] {
        let h = simulate_rir(&spec)?;
        println!(
            "{name:9}  {:.2} m  direct delay {:3} samples  peak at {:3}  T60 ~ {:.3} s  beta {:.3}",
            spec.source_mic_distance(),
            spec.direct_delay_samples(),
            h.peak_index(),
            t60_from_decay(h.taps(), spec.sample_rate),
            spec.reflection_coefficient(),
        );
    }
    Ok(())
}
