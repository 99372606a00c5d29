mod corpus;
mod resample;
mod segment;
mod synth;
mod wav;

pub use corpus::{load_segments, read_manifest, scan_corpus, write_manifest, ManifestEntry};
pub use resample::{resample, MAX_RATE, MIN_RATE};
pub use segment::{peak_normalize, segment_normalize, SegmentSet, SEGMENT_SECONDS, TRAINING_RATE};
pub use synth::{engine_fundamental, synth_noise, synth_noise_at, NoiseKind, ENGINE_HARMONICS};
pub use wav::{read_wav, write_wav, WavEncoding, WavWriteReport};
