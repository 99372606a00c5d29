//! Runs a small experiment grid from an inline TOML config and prints the
//! Table-1 style summary. Results land in `grid_results/`.

use ancsim::harness::{emit_results, render_text, run_experiment, ExperimentConfig, OutputFormat};

const CONFIG: &str = r#"
seed = 11
duration_secs = 2.0
output_dir = "grid_results"
eta2_grid = ["inf", 0.5, 0.1]
max_passes = 20

[step_search]
bracket = [1e-3, 0.5]
iterations = 8

[[noises]]
kind = "pink"

[[noises]]
kind = "engine_harmonics"

[[algorithms]]
type = "wiener"
taps = 512

[[algorithms]]
type = "wiener"
taps = 2048

[[algorithms]]
type = "td_fxlms"
taps = 512

[[algorithms]]
type = "thf_fxlms"
taps = 512
"#;

fn main() -> ancsim::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    let table = run_experiment(&cfg)?;
    print!("{}", render_text(&table));
    for f in emit_results(&table, &cfg.output_dir, &[OutputFormat::Csv, OutputFormat::AlignedText])? {
        println!("wrote {}", f.display());
    }
    Ok(())
}
