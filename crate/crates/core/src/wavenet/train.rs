//! Adam optimisation of the controller through the simulated plant.

use std::path::PathBuf;
use std::sync::mpsc::sync_channel;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::save_checkpoint;
use super::config::ModelConfig;
use super::model::backward_window;
use super::params::WaveNetVnnParams;
use crate::acoustics::PlantModel;
use crate::data_io::SegmentSet;
use crate::dsp::AWeighting;
use crate::error::{AncError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// When set, the rate follows a cosine from `learning_rate` down to
    /// this value over `epochs`.
    pub final_learning_rate: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Loss samples per optimisation step. `None` uses whole segments.
    /// Each step also sees enough preceding samples to fill the receptive
    /// field and the secondary path.
    pub window: Option<usize>,
    /// Bound of the loader queue.
    pub queue_depth: usize,
    pub checkpoint_dir: Option<PathBuf>,
    /// Stop after the epoch during which this many seconds have elapsed.
    pub time_budget_secs: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            learning_rate: 1e-3,
            final_learning_rate: None,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            window: None,
            queue_depth: 4,
            checkpoint_dir: None,
            time_budget_secs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epoch: usize,
}

impl TrainState {
    pub fn new(num_params: usize, cfg: &TrainConfig) -> Self {
        TrainState {
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
            learning_rate: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            epoch: 0,
        }
    }
}

/// Bias-corrected Adam update in place.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut TrainState) -> Result<()> {
    if params.len() != grad.len() || params.len() != state.first_moment.len() || params.len() != state.second_moment.len() {
        return Err(AncError::Shape(format!(
            "adam_step: {} parameters, {} gradients, {} moments",
            params.len(),
            grad.len(),
            state.first_moment.len()
        )));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for i in 0..params.len() {
        let g = grad[i];
        let m = b1 * state.first_moment[i] + (1.0 - b1) * g;
        let v = b2 * state.second_moment[i] + (1.0 - b2) * g * g;
        state.first_moment[i] = m;
        state.second_moment[i] = v;
        params[i] -= state.learning_rate * (m / c1) / ((v / c2).sqrt() + state.epsilon);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: WaveNetVnnParams,
    pub state: TrainState,
    /// Mean window loss (dB) per completed epoch.
    pub epoch_losses: Vec<f64>,
}

struct Window {
    x: Vec<f64>,
    d: Vec<f64>,
    loss_from: usize,
}

/// (segment, first loss sample, loss samples) triples in canonical order.
fn plan_windows(set: &SegmentSet, window: Option<usize>) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for (i, seg) in set.segments.iter().enumerate() {
        let n = seg.len();
        let w = window.unwrap_or(n).clamp(1, n.max(1));
        let mut b = 0;
        while b < n {
            out.push((i, b, w.min(n - b)));
            b += w;
        }
    }
    out
}

/// Learning rate used during `epoch` (0-based).
pub fn scheduled_rate(cfg: &TrainConfig, epoch: usize) -> f64 {
    match cfg.final_learning_rate {
        Some(end) if cfg.epochs > 1 => {
            let t = epoch.min(cfg.epochs - 1) as f64 / (cfg.epochs - 1) as f64;
            end + 0.5 * (cfg.learning_rate - end) * (1.0 + (std::f64::consts::PI * t).cos())
        }
        _ => cfg.learning_rate,
    }
}

pub fn train_model(dataset: &SegmentSet, plant: &PlantModel, model: &ModelConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let params = WaveNetVnnParams::init(model, cfg.seed)?;
    train_from(params, dataset, plant, cfg)
}

/// Continues training from given parameters with a fresh optimiser state.
pub fn train_from(mut params: WaveNetVnnParams, dataset: &SegmentSet, plant: &PlantModel, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(AncError::Config("training set is empty".into()));
    }
    if cfg.epochs == 0 || cfg.queue_depth == 0 || !(cfg.learning_rate > 0.0) {
        return Err(AncError::Config("epochs, queue_depth and learning_rate must be positive".into()));
    }
    if cfg.final_learning_rate.is_some_and(|f| !(f > 0.0)) {
        return Err(AncError::Config("final learning rate must be positive".into()));
    }
    if let Some(dir) = &cfg.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| AncError::io(dir, e))?;
    }
    let rate = dataset.segments[0].sample_rate;
    if dataset.segments.iter().any(|s| s.sample_rate != rate) {
        return Err(AncError::Config("segments have mixed sample rates".into()));
    }
    let aw = AWeighting::new(rate)?;
    let context = params.config().receptive_field() - 1 + plant.secondary.len() - 1;
    let mut state = TrainState::new(params.len(), cfg);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7261_696e);
    let plan = plan_windows(dataset, cfg.window);
    let disturbances: Vec<Vec<f64>> = dataset.segments.iter().map(|x| plant.disturbance(&x.samples)).collect();
    let started = Instant::now();

    for epoch in 0..cfg.epochs {
        state.learning_rate = scheduled_rate(cfg, epoch);
        let mut order = plan.clone();
        order.shuffle(&mut rng);
        let (tx, rx) = sync_channel::<Window>(cfg.queue_depth);
        let mut total = 0.0;
        let disturbances = &disturbances;
        let mut count = 0usize;
        let result: Result<()> = std::thread::scope(|scope| {
            scope.spawn(move || {
                for &(seg, begin, len) in &order {
                    let x = &dataset.segments[seg].samples;
                    let d = &disturbances[seg];
                    let start = begin.saturating_sub(context);
                    let end = begin + len;
                    let w = Window {
                        x: x[start..end].to_vec(),
                        d: d[start..end].to_vec(),
                        loss_from: begin - start,
                    };
                    if tx.send(w).is_err() {
                        break;
                    }
                }
            });
            for w in rx.iter() {
                let (loss, grad) = backward_window(&w.x, &w.d, w.loss_from, plant, &params, &aw)?;
                adam_step(params.as_mut_slice(), &grad, &mut state)?;
                total += loss;
                count += 1;
            }
            Ok(())
        });
        result?;
        state.epoch = epoch + 1;
        let mean = total / count as f64;
        epoch_losses.push(mean);
        log::info!("epoch {}: mean loss {mean:.3} dB ({:.1} s)", epoch + 1, started.elapsed().as_secs_f64());
        if let Some(dir) = &cfg.checkpoint_dir {
            save_checkpoint(&params, &dir.join(format!("epoch_{:03}.wnv", epoch + 1)))?;
        }
        if cfg.time_budget_secs.is_some_and(|b| started.elapsed().as_secs_f64() >= b) {
            log::info!("time budget reached after {} epochs", epoch + 1);
            break;
        }
    }
    Ok(TrainOutcome {
        params,
        state,
        epoch_losses,
    })
}
