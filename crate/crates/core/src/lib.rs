pub mod acoustics;
pub mod adaptive;
pub mod data_io;
pub mod dsp;
pub mod error;
pub mod harness;
pub mod wavenet;
pub mod signal;

pub use error::{AncError, Result};
pub use signal::{FirCoeffs, Signal};
