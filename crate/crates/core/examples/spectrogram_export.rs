//! Exports ANC-off / ANC-on spectrograms for the Wiener filter on engine
//! noise with a strongly saturating loudspeaker.

use ancsim::acoustics::Eta2;
use ancsim::harness::{export_spectrograms, ExperimentConfig};

const CONFIG: &str = r#"
duration_secs = 3.0

[[noises]]
kind = "engine_harmonics"

[[algorithms]]
type = "wiener"
taps = 512
"#;

fn main() -> ancsim::Result<()> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    for eta2 in [Eta2::Linear, Eta2::finite(0.1)?] {
        let (off, on) = export_spectrograms(&cfg, "Wiener(512)", "engine_harmonics", eta2, 512, 256, "spectrograms".as_ref())?;
        println!("{} / {}", off.display(), on.display());
    }
    Ok(())
}
