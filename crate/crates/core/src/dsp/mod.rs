//! Convolution engines, A-weighting, spectrograms and the evaluation metrics.

pub mod convolve;
pub mod metrics;
pub mod spectrum;
pub mod weighting;

pub use convolve::{adjoint_convolve_slice, convolve_auto, direct_convolve, direct_convolve_slice, fast_convolve, OverlapSave};
pub use metrics::{dba_delta_db, nmse_db, nmse_db_slice, AWeighting, MetricsReport, METRIC_FLOOR_DB};
pub use spectrum::{stft_power, stft_spectrogram, SpectrogramMatrix};
pub use weighting::{a_weighting_fir, a_weighting_gain, default_a_weighting_length, fir_gain_db};
