use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ancsim::acoustics::{save_fir_csv, simulate_rir, Eta2};
use ancsim::adaptive::{wiener_design_with, Scenario};
use ancsim::data_io::{load_segments, scan_corpus, synth_noise_at, write_wav, NoiseKind, SegmentSet, WavEncoding, SEGMENT_SECONDS, TRAINING_RATE};
use ancsim::dsp::{direct_convolve_slice, nmse_db_slice, AWeighting};
use ancsim::harness::{
    build_plant, emit_results, export_spectrograms, prepare_noise, render_text, run_experiment, AlgorithmSpec, ExperimentConfig,
    OutputFormat,
};
use ancsim::wavenet::{save_checkpoint, train_from, train_model, load_checkpoint, ModelConfig, TrainConfig};
use ancsim::{AncError, Result};

#[derive(Parser)]
#[command(name = "ancsim", version, about = "Nonlinear active noise control simulator")]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the primary and secondary paths and write them as CSV (and WAV).
    Rir {
        /// Experiment config providing the room; the default room otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write float32 WAV files.
        #[arg(long)]
        wav: bool,
    },
    /// Run the full grid of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides output_dir from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Design a least-squares control filter for one noise and plant.
    Wiener {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 512)]
        taps: usize,
        /// Noise label; the first configured noise by default.
        #[arg(long)]
        noise: Option<String>,
        #[arg(long, default_value = "inf")]
        eta2: Eta2,
        /// Where to write the taps, one per line.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a WaveNet-VNN controller.
    Train {
        /// Experiment config providing the room; the default room otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory of WAV files; synthetic noise is used when absent.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Synthetic noise kinds to train on.
        #[arg(long = "noise", value_delimiter = ',', default_value = "pink,engine_harmonics")]
        noises: Vec<NoiseKind>,
        /// Seconds of each synthetic noise.
        #[arg(long, default_value_t = 30.0)]
        seconds: f64,
        #[arg(long, default_value = "0.5")]
        eta2: Eta2,
        #[arg(long, value_enum, default_value_t = ModelSize::Toy)]
        model: ModelSize,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        /// Cosine-anneal the learning rate down to this value.
        #[arg(long)]
        final_lr: Option<f64>,
        /// Loss samples per step; whole segments when omitted.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stop after the epoch in which this many seconds have passed.
        #[arg(long)]
        budget: Option<f64>,
        /// Continue from an existing checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Save a checkpoint after every epoch here.
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
        #[arg(long, default_value = "model.wnv")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint over the noise and eta2 grid of a config.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write ANC-off / ANC-on spectrograms of one cell as CSV.
    Spectrogram {
        #[arg(long)]
        config: PathBuf,
        /// Algorithm label as it appears in results, e.g. "TD-FxLMS(512)".
        #[arg(long)]
        algorithm: String,
        #[arg(long)]
        noise: String,
        #[arg(long, default_value = "inf")]
        eta2: Eta2,
        #[arg(long, default_value_t = 512)]
        frame: usize,
        #[arg(long, default_value_t = 256)]
        hop: usize,
        #[arg(long, default_value = "spectrograms")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelSize {
    Tiny,
    Toy,
    Full,
}

impl ModelSize {
    fn config(self) -> ModelConfig {
        match self {
            ModelSize::Tiny => ModelConfig::tiny(),
            ModelSize::Toy => ModelConfig::toy(),
            ModelSize::Full => ModelConfig::default(),
        }
    }
}

fn load_or_default(config: Option<&Path>) -> Result<ExperimentConfig> {
    match config {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run_grid(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let table = run_experiment(cfg)?;
    let files = emit_results(&table, out, &[OutputFormat::Csv, OutputFormat::AlignedText])?;
    print!("{}", render_text(&table));
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Rir { config, out, wav } => {
            let cfg = load_or_default(config.as_deref())?;
            std::fs::create_dir_all(&out).map_err(|e| AncError::Io { path: out.clone(), source: e })?;
            let plant = build_plant(&cfg, Eta2::Linear)?;
            for (name, h) in [("primary_path", &plant.primary), ("secondary_path", &plant.secondary)] {
                let csv = out.join(format!("{name}.csv"));
                save_fir_csv(h, &csv)?;
                println!("{name}: {} taps, peak at sample {} -> {}", h.len(), h.peak_index(), csv.display());
                if wav {
                    let sig = ancsim::Signal::new(h.taps().to_vec(), cfg.room.sample_rate)?;
                    write_wav(&sig, &out.join(format!("{name}.wav")), WavEncoding::Float32)?;
                }
            }
            if let Some(src) = cfg.room.noise_source {
                let h = simulate_rir(&cfg.room.path(src, cfg.room.reference_mic))?;
                save_fir_csv(&h, &out.join("reference_path.csv"))?;
            }
            Ok(())
        }
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            run_grid(&cfg, &out)
        }
        Command::Wiener {
            config,
            taps,
            noise,
            eta2,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let index = match &noise {
                Some(label) => cfg
                    .noises
                    .iter()
                    .position(|n| n.label() == *label)
                    .ok_or_else(|| AncError::Config(format!("no noise labelled {label:?}")))?,
                None => 0,
            };
            let plant = build_plant(&cfg, eta2)?;
            let case = prepare_noise(&cfg, index, &plant)?;
            let scenario = Scenario::with_disturbance(&case.reference, &plant, case.disturbance.clone())?;
            let design = wiener_design_with(&scenario, taps)?;
            let y = direct_convolve_slice(&case.reference.samples, design.filter.taps());
            let u = plant.anti_noise(&y);
            let e: Vec<f64> = case.disturbance.iter().zip(&u).map(|(a, b)| a + b).collect();
            let nmse = nmse_db_slice(&e, &case.disturbance)?;
            let dba = AWeighting::new(cfg.room.sample_rate)?.delta_db(&e, &case.disturbance)?;
            println!(
                "Wiener({taps}) on {} at eta2={eta2}: NMSE {nmse:.2} dB, dBA {dba:.2} dB, min prediction error {:.3e}",
                case.label, design.min_prediction_error
            );
            if let Some(path) = out {
                save_fir_csv(&design.filter, &path)?;
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Train {
            config,
            corpus,
            noises,
            seconds,
            eta2,
            model,
            epochs,
            lr,
            final_lr,
            window,
            seed,
            budget,
            resume,
            checkpoint_dir,
            out,
        } => {
            let cfg = load_or_default(config.as_deref())?;
            if cfg.room.sample_rate != TRAINING_RATE {
                return Err(AncError::Config(format!("training runs at {TRAINING_RATE} Hz; the room uses {}", cfg.room.sample_rate)));
            }
            let plant = build_plant(&cfg, eta2)?;
            let set = match corpus {
                Some(dir) => load_segments(&scan_corpus(&dir)?, SEGMENT_SECONDS, seed)?,
                None => {
                    let mut set = SegmentSet::new(seed);
                    for (i, kind) in noises.iter().enumerate() {
                        let x = synth_noise_at(*kind, seconds, seed.wrapping_add(100 + i as u64), TRAINING_RATE)?;
                        set.push_signal(&x, SEGMENT_SECONDS, kind.name())?;
                    }
                    set
                }
            };
            eprintln!("training on {} segments", set.len());
            let tc = TrainConfig {
                epochs,
                learning_rate: lr,
                final_learning_rate: final_lr,
                window,
                seed,
                time_budget_secs: budget,
                checkpoint_dir,
                ..TrainConfig::default()
            };
            let outcome = match resume {
                Some(path) => train_from(load_checkpoint(&path)?, &set, &plant, &tc)?,
                None => train_model(&set, &plant, &model.config(), &tc)?,
            };
            save_checkpoint(&outcome.params, &out)?;
            for (i, l) in outcome.epoch_losses.iter().enumerate() {
                println!("epoch {:3}  loss {l:8.3} dB", i + 1);
            }
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Command::Eval { config, checkpoint, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.algorithms = vec![AlgorithmSpec::Wavenet { checkpoint, label: None }];
            cfg.validate()?;
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            run_grid(&cfg, &out)
        }
        Command::Spectrogram {
            config,
            algorithm,
            noise,
            eta2,
            frame,
            hop,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (off, on) = export_spectrograms(&cfg, &algorithm, &noise, eta2, frame, hop, &out)?;
            println!("ANC off: {}\nANC on:  {}", off.display(), on.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
