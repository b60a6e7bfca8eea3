//! Monte Carlo drivers.
//!
//! Every driver splits its work into fixed-size chunks and gives chunk `c` the
//! stream `rng.child(c)`; chunk results are merged in index order, so output
//! is identical for any thread count.

mod detection;
mod envelope;
mod moment;

pub use detection::{
    detection_statistics, largest_singular_value, run_detection, summarize_detection, DetectionReport, DetectionSummary, DetectionTrial,
    Hypothesis, Threshold, DEFAULT_THRESHOLD, MAX_DETECTION_N,
};
pub use envelope::{run_envelope, EnvelopeReport, EnvelopeSummary, ENVELOPE_TOL};
pub use moment::{combine_moment, run_moment, run_moment_chunks, MomentEstimate, MomentPartial};

/// Samples per parallel task.
pub(crate) const CHUNK: usize = 4096;

/// Half-open ranges `[start, end)` covering `0..total` in steps of `size`.
pub(crate) fn chunks(total: usize, size: usize) -> impl Iterator<Item = (u64, std::ops::Range<usize>)> {
    (0..total.div_ceil(size)).map(move |c| (c as u64, c * size..((c + 1) * size).min(total)))
}
