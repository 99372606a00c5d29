//! Converges every classical controller on pink noise at three loudspeaker
//! nonlinearities and compares them with the Wiener filter.

use ancsim::acoustics::{Eta2, PlantModel};
use ancsim::adaptive::{wiener_design_with, AdaptiveController, FdFelmsWhitened, FdFxnlms, Scenario, TdFxlms, ThfFxlms};
use ancsim::data_io::{synth_noise, NoiseKind};
use ancsim::dsp::{direct_convolve_slice, nmse_db_slice};
use ancsim::harness::{converge, RoomConfig};

fn main() -> ancsim::Result<()> {
    let base = RoomConfig::default().plant(Eta2::Linear)?;
    let x = synth_noise(NoiseKind::Pink, 3.0, 7)?;
    let taps = 512;
    for eta2 in [Eta2::Linear, Eta2::finite(0.5)?, Eta2::finite(0.1)?] {
        let plant: PlantModel = base.with_eta2(eta2);
        let scenario = Scenario::new(&x, &plant)?;
        let bound = scenario.lms_step_bound(taps);
        let mut controllers: Vec<Box<dyn AdaptiveController>> = vec![
            Box::new(TdFxlms::new(taps, 0.003 * bound)?),
            Box::new(ThfFxlms::new(taps, 0.003 * bound, ThfFxlms::default_lambda(&plant))?),
            Box::new(FdFxnlms::new(taps, 0.02, 0.9)?),
            Box::new(FdFelmsWhitened::new(taps, 0.01, 0.9, 2)?),
        ];
        let w = wiener_design_with(&scenario, taps)?.filter;
        let u = plant.anti_noise(&direct_convolve_slice(&x.samples, w.taps()));
        let e: Vec<f64> = scenario.disturbance.iter().zip(&u).map(|(a, b)| a + b).collect();
        println!("eta2 = {eta2}");
        println!("  {:16} {:8.2} dB", format!("Wiener({taps})"), nmse_db_slice(&e, &scenario.disturbance)?);
        for c in controllers.iter_mut() {
            let (report, passes, nmse) = converge(c.as_mut(), &scenario, 30, 0.1)?;
            let state = if report.diverged { "diverged".to_string() } else { format!("{nmse:8.2} dB") };
            println!("  {:16} {state}  after {passes} passes", c.label());
        }
    }
    Ok(())
}
