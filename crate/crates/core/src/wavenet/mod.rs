mod checkpoint;
mod config;
mod loss;
mod model;
mod ops;
mod params;
mod train;
mod vmath;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, write_params_csv, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{ModelConfig, DILATED_TAPS};
pub use loss::{anc_loss, anc_loss_grad, LOSS_DELTA};
pub use model::{model_backward, model_error, model_forward, model_forward_f32};
pub use ops::{causal_dilated_conv, gated_residual_block, vnn_quadratic_unit, Channels, ConvKernel, ResidualLayer};
pub use params::{TensorSpec, WaveNetVnnParams};
pub use train::{adam_step, scheduled_rate, train_from, train_model, TrainConfig, TrainOutcome, TrainState};
