//! Experiment description, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acoustics::{DelayInterpolation, Eta2, PlantModel, RoomSpec, DEFAULT_SPEED_OF_SOUND};
use crate::data_io::NoiseKind;
use crate::error::{AncError, Result};

/// Room geometry shared by every path of the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoomConfig {
    pub dimensions: [f64; 3],
    pub t60: f64,
    pub sample_rate: f64,
    pub rir_length: usize,
    pub speed_of_sound: f64,
    pub interpolation: DelayInterpolation,
    pub reference_mic: [f64; 3],
    pub loudspeaker: [f64; 3],
    pub error_mic: [f64; 3],
    /// Noise source position, only used when the reference is picked up by
    /// the reference microphone.
    pub noise_source: Option<[f64; 3]>,
}

impl Default for RoomConfig {
    fn default() -> Self {
        RoomConfig {
            dimensions: [3.0, 4.0, 2.0],
            t60: 0.2,
            sample_rate: 16000.0,
            rir_length: 512,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            interpolation: DelayInterpolation::default(),
            reference_mic: [1.5, 1.0, 1.0],
            loudspeaker: [1.5, 2.5, 1.0],
            error_mic: [1.5, 3.0, 1.0],
            noise_source: None,
        }
    }
}

impl RoomConfig {
    pub fn path(&self, from: [f64; 3], to: [f64; 3]) -> RoomSpec {
        RoomSpec {
            speed_of_sound: self.speed_of_sound,
            interpolation: self.interpolation,
            ..RoomSpec::new(self.dimensions, from, to, self.t60, self.sample_rate, self.rir_length)
        }
    }

    pub fn primary_room(&self) -> RoomSpec {
        self.path(self.reference_mic, self.error_mic)
    }

    pub fn secondary_room(&self) -> RoomSpec {
        self.path(self.loudspeaker, self.error_mic)
    }

    pub fn plant(&self, eta2: Eta2) -> Result<PlantModel> {
        PlantModel::from_rooms(&self.primary_room(), &self.secondary_room(), eta2)
    }
}

/// Where the controller's reference signal comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// The noise waveform itself, filtered by the primary path to the error mic.
    #[default]
    Source,
    /// The noise source radiates to both microphones; the controller hears
    /// the reference-mic signal.
    RefMic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepSearch {
    pub enabled: bool,
    /// Search interval as multiples of each algorithm's nominal step.
    pub bracket: [f64; 2],
    pub iterations: usize,
}

impl Default for StepSearch {
    fn default() -> Self {
        StepSearch {
            enabled: true,
            bracket: [1e-3, 1.0],
            iterations: 20,
        }
    }
}

/// One noise of the grid: a synthetic kind or a WAV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSource {
    Synthetic {
        kind: NoiseKind,
        #[serde(default)]
        label: Option<String>,
    },
    File {
        path: PathBuf,
        #[serde(default)]
        label: Option<String>,
    },
}

impl NoiseSource {
    pub fn label(&self) -> String {
        match self {
            NoiseSource::Synthetic { kind, label } => label.clone().unwrap_or_else(|| kind.name().to_string()),
            NoiseSource::File { path, label } => label.clone().unwrap_or_else(|| {
                path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    Wiener {
        taps: usize,
    },
    TdFxlms {
        taps: usize,
        #[serde(default)]
        mu: Option<f64>,
    },
    ThfFxlms {
        taps: usize,
        #[serde(default)]
        mu: Option<f64>,
        /// Defaults to the value matching the loudspeaker saturation limit.
        #[serde(default)]
        lambda: Option<f64>,
    },
    FdFxnlms {
        taps: usize,
        #[serde(default)]
        mu: Option<f64>,
        #[serde(default = "default_forgetting")]
        forgetting: f64,
    },
    FdFelms {
        taps: usize,
        #[serde(default)]
        mu: Option<f64>,
        #[serde(default = "default_forgetting")]
        forgetting: f64,
        #[serde(default = "default_update_frames")]
        update_frames: usize,
    },
    Wavenet {
        checkpoint: PathBuf,
        #[serde(default)]
        label: Option<String>,
    },
}

fn default_forgetting() -> f64 {
    0.9
}

fn default_update_frames() -> usize {
    2
}

impl AlgorithmSpec {
    pub fn label(&self) -> String {
        match self {
            AlgorithmSpec::Wiener { taps } => format!("Wiener({taps})"),
            AlgorithmSpec::TdFxlms { taps, .. } => format!("TD-FxLMS({taps})"),
            AlgorithmSpec::ThfFxlms { taps, .. } => format!("THF-FxLMS({taps})"),
            AlgorithmSpec::FdFxnlms { taps, .. } => format!("FD-FxNLMS({taps})"),
            AlgorithmSpec::FdFelms { taps, .. } => format!("FD-FeLMS-W({taps})"),
            AlgorithmSpec::Wavenet { checkpoint, label } => label.clone().unwrap_or_else(|| {
                format!(
                    "WaveNet-VNN({})",
                    checkpoint.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
                )
            }),
        }
    }

    fn validate(&self) -> Result<()> {
        let taps = match self {
            AlgorithmSpec::Wavenet { .. } => return Ok(()),
            AlgorithmSpec::Wiener { taps }
            | AlgorithmSpec::TdFxlms { taps, .. }
            | AlgorithmSpec::ThfFxlms { taps, .. }
            | AlgorithmSpec::FdFxnlms { taps, .. }
            | AlgorithmSpec::FdFelms { taps, .. } => *taps,
        };
        if taps == 0 {
            return Err(AncError::Config(format!("{}: filter length must be positive", self.label())));
        }
        if matches!(self, AlgorithmSpec::FdFxnlms { .. } | AlgorithmSpec::FdFelms { .. }) && !taps.is_power_of_two() {
            return Err(AncError::Config(format!("{}: block filters need a power-of-two length", self.label())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Length of every synthetic noise.
    pub duration_secs: f64,
    pub eta2_grid: Vec<Eta2>,
    pub reference: ReferenceMode,
    /// Upper bound on passes over the data for adaptive filters.
    pub max_passes: usize,
    /// Passes stop once the steady-state NMSE moves less than this.
    pub convergence_tol_db: f64,
    pub room: RoomConfig,
    pub step_search: StepSearch,
    pub noises: Vec<NoiseSource>,
    pub algorithms: Vec<AlgorithmSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            output_dir: PathBuf::from("results"),
            duration_secs: 3.0,
            eta2_grid: vec![Eta2::Linear, Eta2::Finite(0.5), Eta2::Finite(0.1)],
            reference: ReferenceMode::Source,
            max_passes: 30,
            convergence_tol_db: 0.1,
            room: RoomConfig::default(),
            step_search: StepSearch::default(),
            noises: Vec::new(),
            algorithms: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| AncError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative noise and checkpoint paths are resolved
    /// against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AncError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        for n in &mut self.noises {
            if let NoiseSource::File { path, .. } = n {
                fix(path);
            }
        }
        for a in &mut self.algorithms {
            if let AlgorithmSpec::Wavenet { checkpoint, .. } = a {
                fix(checkpoint);
            }
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| AncError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(AncError::Config("no algorithms configured".into()));
        }
        if self.noises.is_empty() {
            return Err(AncError::Config("no noise sources configured".into()));
        }
        if self.eta2_grid.is_empty() {
            return Err(AncError::Config("eta2 grid is empty".into()));
        }
        if !(self.duration_secs > 0.0 && self.duration_secs.is_finite()) {
            return Err(AncError::Config(format!("duration {} s must be positive", self.duration_secs)));
        }
        if self.max_passes == 0 || !(self.convergence_tol_db > 0.0) {
            return Err(AncError::Config("max_passes and convergence_tol_db must be positive".into()));
        }
        let [lo, hi] = self.step_search.bracket;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) || self.step_search.iterations == 0 {
            return Err(AncError::Config(format!("invalid step-search bracket [{lo}, {hi}]")));
        }
        for a in &self.algorithms {
            a.validate()?;
            if let AlgorithmSpec::Wavenet { checkpoint, .. } = a {
                if !checkpoint.is_file() {
                    return Err(AncError::Config(format!("checkpoint {} not found", checkpoint.display())));
                }
            }
        }
        for n in &self.noises {
            if let NoiseSource::File { path, .. } = n {
                if !path.is_file() {
                    return Err(AncError::Config(format!("noise file {} not found", path.display())));
                }
            }
        }
        let mut labels: Vec<String> = self.noises.iter().map(NoiseSource::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(AncError::Config("noise labels must be unique".into()));
        }
        let mut algs: Vec<String> = self.algorithms.iter().map(AlgorithmSpec::label).collect();
        algs.sort();
        if algs.windows(2).any(|w| w[0] == w[1]) {
            return Err(AncError::Config("algorithm labels must be unique".into()));
        }
        self.room.primary_room().validate()?;
        self.room.secondary_room().validate()?;
        if self.reference == ReferenceMode::RefMic {
            let src = self
                .room
                .noise_source
                .ok_or_else(|| AncError::Config("reference = \"ref_mic\" needs room.noise_source".into()))?;
            self.room.path(src, self.room.reference_mic).validate()?;
            self.room.path(src, self.room.error_mic).validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).unwrap_or_else(|_| format!("{self:?}"));
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 3
eta2_grid = ["inf", 0.5]

[[noises]]
kind = "pink"

[[algorithms]]
type = "wiener"
taps = 512

[[algorithms]]
type = "td_fxlms"
taps = 512
"#;

    #[test]
    fn parses_sample() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.eta2_grid, vec![Eta2::Linear, Eta2::Finite(0.5)]);
        assert_eq!(cfg.algorithms[1], AlgorithmSpec::TdFxlms { taps: 512, mu: None });
        assert_eq!(cfg.noises[0].label(), "pink");
        assert_eq!(cfg.room, RoomConfig::default());
        assert_eq!(cfg.step_search.iterations, 20);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn hash_tracks_every_field() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.hash(), cfg.clone().hash());
        let mut other = cfg.clone();
        other.room.t60 = 0.25;
        assert_ne!(cfg.hash(), other.hash());
        let mut other = cfg.clone();
        other.step_search.iterations = 19;
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn rejects_bad_configs() {
        let empty = SAMPLE.replace("[[algorithms]]\ntype = \"wiener\"\ntaps = 512\n\n[[algorithms]]\ntype = \"td_fxlms\"\ntaps = 512\n", "");
        assert!(matches!(ExperimentConfig::from_toml(&empty), Err(AncError::Config(_))));
        let bad = SAMPLE.replace("\"pink\"", "\"brown\"");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(AncError::Config(_))));
        let bad = SAMPLE.replace("type = \"td_fxlms\"", "type = \"rls\"");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(AncError::Config(_))));
        let bad = SAMPLE.replace("seed = 3", "seed = 3\nunknown = 1");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
        let bad = format!("{SAMPLE}\n[[noises]]\npath = \"/nonexistent/x.wav\"\n");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(AncError::Config(_))));
        let bad = SAMPLE.replace("seed = 3", "seed = 3\nreference = \"ref_mic\"");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(AncError::Config(_))));
        let dup = format!("{SAMPLE}\n[[algorithms]]\ntype = \"wiener\"\ntaps = 512\n");
        assert!(matches!(ExperimentConfig::from_toml(&dup), Err(AncError::Config(_))));
    }
}
