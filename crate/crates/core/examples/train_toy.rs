//! Trains the toy WaveNet-VNN for a short time budget and compares it with
//! TD-FxLMS on a held-out pink segment.
//!
//! `cargo run --release --example train_toy -- [seconds]`

use ancsim::acoustics::Eta2;
use ancsim::adaptive::{AdaptiveController, Scenario, TdFxlms};
use ancsim::data_io::{synth_noise, NoiseKind, SegmentSet, SEGMENT_SECONDS};
use ancsim::dsp::nmse_db_slice;
use ancsim::harness::{converge, RoomConfig};
use ancsim::wavenet::{model_error, save_checkpoint, train_model, ModelConfig, TrainConfig};

fn main() -> ancsim::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let budget: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(120.0);
    let plant = RoomConfig::default().plant(Eta2::finite(0.5)?)?;
    let mut set = SegmentSet::new(1);
    set.push_signal(&synth_noise(NoiseKind::Pink, 30.0, 100)?, SEGMENT_SECONDS, "pink")?;
    set.push_signal(&synth_noise(NoiseKind::EngineHarmonics, 30.0, 101)?, SEGMENT_SECONDS, "engine")?;
    let cfg = TrainConfig {
        epochs: 1000,
        learning_rate: 3e-3,
        window: Some(4000),
        seed: 1,
        time_budget_secs: Some(budget),
        ..TrainConfig::default()
    };
    let out = train_model(&set, &plant, &ModelConfig::toy(), &cfg)?;
    save_checkpoint(&out.params, std::path::Path::new("toy.wnv"))?;

    let x = synth_noise(NoiseKind::Pink, 3.0, 900)?;
    let d = plant.disturbance(&x.samples);
    let e = model_error(&x, &plant, &out.params)?;
    println!("WaveNet-VNN (toy): {:.2} dB", nmse_db_slice(&e.samples, &d)?);
    let scenario = Scenario::new(&x, &plant)?;
    let mut td = TdFxlms::new(512, 0.003 * scenario.lms_step_bound(512))?;
    let (_, passes, nmse) = converge(&mut td, &scenario, 40, 0.05)?;
    println!("{}: {nmse:.2} dB after {passes} passes", td.label());
    Ok(())
}
