//! Grid execution: one cell per (algorithm, noise, η²).

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};

use super::config::{AlgorithmSpec, ExperimentConfig, NoiseSource, ReferenceMode};
use super::report::{CellStatus, ResultRow, ResultsTable, TableMetadata};
use crate::acoustics::{simulate_rir, Eta2, PlantModel};
use crate::adaptive::{wiener_design_with, AdaptiveController, FdFelmsWhitened, FdFxnlms, RunReport, Scenario, TdFxlms, ThfFxlms};
use crate::data_io::{peak_normalize, read_wav, resample, synth_noise_at};
use crate::dsp::{direct_convolve_slice, nmse_db_slice, AWeighting, MetricsReport};
use crate::error::{AncError, Result};
use crate::signal::Signal;
use crate::wavenet::{load_checkpoint, model_forward, WaveNetVnnParams};

/// Reference and disturbance for one noise, shared by every cell.
#[derive(Debug, Clone)]
pub struct NoiseCase {
    pub label: String,
    pub reference: Signal,
    pub disturbance: Vec<f64>,
}

/// Builds the plant at `eta2`; in microphone-reference mode the primary
/// path is the source→error-mic response used for the disturbance.
pub fn build_plant(config: &ExperimentConfig, eta2: Eta2) -> Result<PlantModel> {
    match config.reference {
        ReferenceMode::Source => config.room.plant(eta2),
        ReferenceMode::RefMic => {
            let src = config
                .room
                .noise_source
                .ok_or_else(|| AncError::Config("ref_mic mode needs room.noise_source".into()))?;
            let primary = config.room.path(src, config.room.error_mic);
            PlantModel::from_rooms(&primary, &config.room.secondary_room(), eta2)
        }
    }
}

fn load_noise(config: &ExperimentConfig, index: usize) -> Result<Signal> {
    let fs = config.room.sample_rate;
    match &config.noises[index] {
        NoiseSource::Synthetic { kind, .. } => {
            synth_noise_at(*kind, config.duration_secs, config.seed.wrapping_add(index as u64), fs)
        }
        NoiseSource::File { path, .. } => {
            let raw = read_wav(path)?;
            let at_rate = resample(&raw, fs)?;
            // Test files are normalized whole, never cut into segments.
            peak_normalize(&at_rate)
        }
    }
}

/// Loads a noise and derives the controller reference and the disturbance.
pub fn prepare_noise(config: &ExperimentConfig, index: usize, plant: &PlantModel) -> Result<NoiseCase> {
    let source = load_noise(config, index)?;
    let (reference, disturbance) = match config.reference {
        ReferenceMode::Source => {
            let d = plant.disturbance(&source.samples);
            (source, d)
        }
        ReferenceMode::RefMic => {
            let src = config.room.noise_source.expect("validated");
            let h = simulate_rir(&config.room.path(src, config.room.reference_mic))?;
            let peak = h.taps()[h.peak_index()].abs();
            let x = direct_convolve_slice(&source.samples, h.taps());
            let x: Vec<f64> = x.iter().map(|v| v / peak).collect();
            let d = plant.disturbance(&source.samples);
            (source.with_samples(x), d)
        }
    };
    Ok(NoiseCase {
        label: config.noises[index].label(),
        reference,
        disturbance,
    })
}

/// Residual and step size of one finished cell.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub error: Vec<f64>,
    pub step_size: Option<f64>,
    pub passes: usize,
}

/// Repeats passes until the steady-state NMSE moves less than `tol_db`.
/// Returns the last report, the number of passes and the steady-state NMSE.
pub fn converge(
    controller: &mut dyn AdaptiveController,
    scenario: &Scenario,
    max_passes: usize,
    tol_db: f64,
) -> Result<(RunReport, usize, f64)> {
    let mut last: Option<f64> = None;
    for pass in 1..=max_passes {
        let report = controller.run_pass(scenario)?;
        if report.diverged {
            return Ok((report, pass, f64::INFINITY));
        }
        let nmse = report.steady_state_nmse_db(&scenario.disturbance)?;
        let done = last.is_some_and(|prev| (prev - nmse).abs() < tol_db);
        if done || pass == max_passes {
            return Ok((report, pass, nmse));
        }
        last = Some(nmse);
    }
    unreachable!("max_passes is validated to be positive")
}

type Factory<'a> = dyn Fn(f64) -> Result<Box<dyn AdaptiveController>> + 'a;

struct Trial {
    mu: f64,
    report: RunReport,
    passes: usize,
    score: f64,
}

fn trial(make: &Factory<'_>, mu: f64, scenario: &Scenario, config: &ExperimentConfig) -> Result<Trial> {
    let mut c = make(mu)?;
    let (report, passes, score) = converge(c.as_mut(), scenario, config.max_passes, config.convergence_tol_db)?;
    Ok(Trial { mu, report, passes, score })
}

/// Golden-section search over `log μ`; the objective is the converged
/// steady-state NMSE, infinite when the run diverges.
fn search_step(make: &Factory<'_>, nominal: f64, scenario: &Scenario, config: &ExperimentConfig) -> Result<Trial> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let [lo, hi] = config.step_search.bracket;
    let (mut a, mut b) = ((lo * nominal).ln(), (hi * nominal).ln());
    let mut best: Option<Trial> = None;
    let eval = |log_mu: f64, best: &mut Option<Trial>| -> Result<f64> {
        let t = trial(make, log_mu.exp(), scenario, config)?;
        let s = t.score;
        if t.score.is_finite() && best.as_ref().map_or(true, |b| t.score < b.score) {
            *best = Some(t);
        }
        Ok(s)
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c, &mut best)?;
    let mut fd = eval(d, &mut best)?;
    for _ in 2..config.step_search.iterations {
        // Ties (both diverged) move toward the smaller, safer steps.
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c, &mut best)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d, &mut best)?;
        }
    }
    best.ok_or_else(|| {
        AncError::Numerical(format!(
            "diverged at every step size in [{:.3e}, {:.3e}]",
            lo * nominal,
            hi * nominal
        ))
    })
}

fn run_adaptive(
    make: &Factory<'_>,
    fixed_mu: Option<f64>,
    nominal: f64,
    scenario: &Scenario,
    config: &ExperimentConfig,
) -> Result<CellRun> {
    let t = match fixed_mu {
        Some(mu) => trial(make, mu, scenario, config)?,
        None if config.step_search.enabled => search_step(make, nominal, scenario, config)?,
        None => trial(make, 0.1 * nominal, scenario, config)?,
    };
    if t.report.diverged {
        return Err(AncError::Numerical(format!("diverged with step size {:.3e}", t.mu)));
    }
    Ok(CellRun {
        error: t.report.error_signal.samples,
        step_size: Some(t.mu),
        passes: t.passes,
    })
}

/// Runs one algorithm on one noise and plant.
pub fn run_cell(
    algorithm: &AlgorithmSpec,
    case: &NoiseCase,
    plant: &PlantModel,
    config: &ExperimentConfig,
    models: &[(String, WaveNetVnnParams)],
) -> Result<CellRun> {
    let x = &case.reference;
    let scenario = Scenario::with_disturbance(x, plant, case.disturbance.clone())?;
    let closed_loop = |y: &[f64]| -> Vec<f64> {
        let u = plant.anti_noise(y);
        case.disturbance.iter().zip(&u).map(|(a, b)| a + b).collect()
    };
    match algorithm {
        AlgorithmSpec::Wiener { taps } => {
            let w = wiener_design_with(&scenario, *taps)?.filter;
            let y = direct_convolve_slice(&x.samples, w.taps());
            Ok(CellRun {
                error: closed_loop(&y),
                step_size: None,
                passes: 1,
            })
        }
        AlgorithmSpec::TdFxlms { taps, mu } => {
            let taps = *taps;
            let make = move |mu: f64| -> Result<Box<dyn AdaptiveController>> { Ok(Box::new(TdFxlms::new(taps, mu)?)) };
            run_adaptive(&make, *mu, scenario.lms_step_bound(taps), &scenario, config)
        }
        AlgorithmSpec::ThfFxlms { taps, mu, lambda } => {
            let taps = *taps;
            let lambda = lambda.unwrap_or_else(|| ThfFxlms::default_lambda(plant));
            let make = move |mu: f64| -> Result<Box<dyn AdaptiveController>> { Ok(Box::new(ThfFxlms::new(taps, mu, lambda)?)) };
            run_adaptive(&make, *mu, scenario.lms_step_bound(taps), &scenario, config)
        }
        AlgorithmSpec::FdFxnlms { taps, mu, forgetting } => {
            let (taps, forgetting) = (*taps, *forgetting);
            let make =
                move |mu: f64| -> Result<Box<dyn AdaptiveController>> { Ok(Box::new(FdFxnlms::new(taps, mu, forgetting)?)) };
            run_adaptive(&make, *mu, 1.0, &scenario, config)
        }
        AlgorithmSpec::FdFelms {
            taps,
            mu,
            forgetting,
            update_frames,
        } => {
            let (taps, forgetting, frames) = (*taps, *forgetting, *update_frames);
            let make = move |mu: f64| -> Result<Box<dyn AdaptiveController>> {
                Ok(Box::new(FdFelmsWhitened::new(taps, mu, forgetting, frames)?))
            };
            run_adaptive(&make, *mu, 1.0 / frames as f64, &scenario, config)
        }
        AlgorithmSpec::Wavenet { .. } => {
            let label = algorithm.label();
            let params = models
                .iter()
                .find(|(l, _)| *l == label)
                .map(|(_, p)| p)
                .ok_or_else(|| AncError::Config(format!("model {label} was not loaded")))?;
            let y = model_forward(x, params)?;
            Ok(CellRun {
                error: closed_loop(&y.samples),
                step_size: None,
                passes: 0,
            })
        }
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

struct Job {
    algorithm: usize,
    noise: usize,
    eta2: usize,
}

/// Runs every cell of the grid. Cell failures become rows with a note;
/// only configuration and input errors abort the experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultsTable> {
    config.validate()?;
    let started = unix_now();
    let base = build_plant(config, Eta2::Linear)?;
    let plants: Vec<PlantModel> = config.eta2_grid.iter().map(|&e| base.with_eta2(e)).collect();
    let cases = (0..config.noises.len())
        .map(|i| prepare_noise(config, i, &base))
        .collect::<Result<Vec<_>>>()?;
    let mut models = Vec::new();
    for a in &config.algorithms {
        if let AlgorithmSpec::Wavenet { checkpoint, .. } = a {
            models.push((a.label(), load_checkpoint(checkpoint)?));
        }
    }
    let aw = AWeighting::new(config.room.sample_rate)?;

    let mut jobs = Vec::new();
    for algorithm in 0..config.algorithms.len() {
        for noise in 0..cases.len() {
            for eta2 in 0..plants.len() {
                jobs.push(Job { algorithm, noise, eta2 });
            }
        }
    }
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<(usize, ResultRow)>> = Mutex::new(Vec::with_capacity(jobs.len()));
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let spec = &config.algorithms[job.algorithm];
                let case = &cases[job.noise];
                let eta2 = config.eta2_grid[job.eta2];
                let outcome = run_cell(spec, case, &plants[job.eta2], config, &models).and_then(|run| {
                    let nmse = nmse_db_slice(&run.error, &case.disturbance)?;
                    let dba = aw.delta_db(&run.error, &case.disturbance)?;
                    Ok((run, nmse, dba))
                });
                let metrics = |nmse_db, dba_delta_db| MetricsReport {
                    algorithm: spec.label(),
                    noise: case.label.clone(),
                    eta2: eta2.to_string(),
                    nmse_db,
                    dba_delta_db,
                };
                let row = match outcome {
                    Ok((run, nmse, dba)) => {
                        info!("{} / {} / eta2={eta2}: NMSE {nmse:.2} dB, dBA {dba:.2}", spec.label(), case.label);
                        ResultRow {
                            metrics: metrics(nmse, dba),
                            status: CellStatus::Ok,
                            step_size: run.step_size,
                            passes: run.passes,
                            note: String::new(),
                        }
                    }
                    Err(e) => {
                        warn!("{} / {} / eta2={eta2} failed: {e}", spec.label(), case.label);
                        ResultRow {
                            metrics: metrics(f64::NAN, f64::NAN),
                            status: CellStatus::Failed,
                            step_size: None,
                            passes: 0,
                            note: e.to_string(),
                        }
                    }
                };
                rows.lock().expect("results lock").push((i, row));
            });
        }
    });
    let mut rows = rows.into_inner().expect("results lock");
    rows.sort_by_key(|(i, _)| *i);
    Ok(ResultsTable {
        rows: rows.into_iter().map(|(_, r)| r).collect(),
        metadata: TableMetadata {
            config_hash: config.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            reference_mode: config.reference,
            started_unix: started,
            finished_unix: unix_now(),
        },
    })
}
