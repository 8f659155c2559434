//! Segment-based frame sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    /// One uniformly random frame per segment.
    Train,
    /// The middle frame of each segment.
    Test,
}

/// Frame offsets within a shot of `len` frames, one per segment. Segment `s`
/// covers `[floor(s*len/S), floor((s+1)*len/S))`; the test index is
/// `floor((lo+hi)/2)`. Shots shorter than `segments` map segment `s` to frame
/// `min(s, len-1)`, repeating the last frame.
pub fn tsn_sample<R: Rng>(len: usize, segments: usize, mode: SampleMode, rng: &mut R) -> Result<Vec<usize>, DataError> {
    let bounds = segment_bounds(len, segments)?;
    Ok(bounds
        .into_iter()
        .map(|(lo, hi)| match mode {
            SampleMode::Test => (lo + hi) / 2,
            SampleMode::Train if hi - lo <= 1 => lo,
            SampleMode::Train => rng.random_range(lo..hi),
        })
        .collect())
}

/// Test-mode indices, which need no randomness.
pub fn tsn_test_indices(len: usize, segments: usize) -> Result<Vec<usize>, DataError> {
    Ok(segment_bounds(len, segments)?
        .into_iter()
        .map(|(lo, hi)| (lo + hi) / 2)
        .collect())
}

/// Half-open frame range of each segment; a shot shorter than `segments`
/// gives segment `s` the single frame `min(s, len-1)`.
pub fn segment_bounds(len: usize, segments: usize) -> Result<Vec<(usize, usize)>, DataError> {
    if len == 0 {
        return Err(DataError::Contract("cannot sample an empty shot".into()));
    }
    if segments == 0 {
        return Err(DataError::Config("segments must be positive".into()));
    }
    if len < segments {
        return Ok((0..segments).map(|s| (s.min(len - 1), s.min(len - 1) + 1)).collect());
    }
    Ok((0..segments)
        .map(|s| (s * len / segments, (s + 1) * len / segments))
        .collect())
}
