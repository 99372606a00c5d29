//! Fixed-length slicing with per-segment peak normalization.

use crate::error::{AncError, Result};
use crate::signal::Signal;

pub const SEGMENT_SECONDS: f64 = 3.0;
pub const TRAINING_RATE: f64 = 16000.0;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentSet {
    pub segments: Vec<Signal>,
    /// Source identifier per segment.
    pub labels: Vec<String>,
    pub seed: u64,
}

impl SegmentSet {
    pub fn new(seed: u64) -> Self {
        SegmentSet {
            seed,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Slices `signal` into non-overlapping pieces and appends them.
    /// Nothing is appended when any piece fails.
    pub fn push_signal(&mut self, signal: &Signal, seconds: f64, label: &str) -> Result<usize> {
        let pieces = slice_normalized(signal, seconds)?;
        let n = pieces.len();
        self.labels.extend(std::iter::repeat(label.to_string()).take(n));
        self.segments.extend(pieces);
        Ok(n)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Signal, &str)> {
        self.segments.iter().zip(self.labels.iter().map(String::as_str))
    }
}

/// Scales a signal so that its peak magnitude is exactly 1.
pub fn peak_normalize(signal: &Signal) -> Result<Signal> {
    let peak = signal.peak();
    if peak == 0.0 {
        return Err(AncError::DegenerateSegment("all-zero signal cannot be normalized".into()));
    }
    Ok(signal.with_samples(signal.samples.iter().map(|v| v / peak).collect()))
}

fn slice_normalized(signal: &Signal, seconds: f64) -> Result<Vec<Signal>> {
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(AncError::Domain(format!("segment length must be positive, got {seconds} s")));
    }
    let seg_len = (seconds * signal.sample_rate).round() as usize;
    if seg_len == 0 || signal.len() < seg_len {
        return Err(AncError::Shape(format!(
            "signal of {} samples is shorter than one {seconds} s segment ({seg_len} samples)",
            signal.len()
        )));
    }
    signal
        .samples
        .chunks_exact(seg_len)
        .enumerate()
        .map(|(i, chunk)| {
            peak_normalize(&signal.with_samples(chunk.to_vec())).map_err(|_| {
                AncError::DegenerateSegment(format!("segment {i} is all zeros"))
            })
        })
        .collect()
}

pub fn segment_normalize(signal: &Signal, seconds: f64) -> Result<SegmentSet> {
    let mut set = SegmentSet::new(0);
    set.push_signal(signal, seconds, "signal")?;
    Ok(set)
}
