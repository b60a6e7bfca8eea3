use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{chunks, CHUNK};
use crate::grf::{self, GrfCurve};
use crate::rng::RngStream;
use crate::sampling::{sample_eta, EtaSample};
use crate::spectra::Spectrum;
use crate::{Error, Result};

/// Slack allowed above the envelope before a sample counts as a violation.
pub const ENVELOPE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct EnvelopeReport {
    pub spectrum: Spectrum,
    pub n_block: usize,
    pub samples: Vec<EtaSample>,
    /// Rate function and rank-agnostic bound on a uniform grid of `(0, eta_max)`.
    pub curve: GrfCurve,
    /// Samples with `y > -I(|x|) + ENVELOPE_TOL`.
    pub violations: usize,
    /// `max (y - (-I(|x|)))` over samples, `-inf` when there are none.
    pub max_excess: f64,
}

/// JSON-friendly digest of an [`EnvelopeReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    pub spectrum: Spectrum,
    pub n_block: usize,
    pub samples: usize,
    pub violations: usize,
    #[serde(with = "grf::extended_float")]
    pub max_excess: f64,
    pub grid_points: usize,
    /// The bound is at least the rate function at every grid point.
    pub bound_dominates: bool,
    /// Largest `upper_bound - (-I)` over the grid.
    #[serde(with = "grf::extended_float")]
    pub bound_max_gap: f64,
}

impl EnvelopeReport {
    pub fn summary(&self) -> EnvelopeSummary {
        let gaps = self.curve.points.iter().map(|p| p.upper_bound - p.neg_grf);
        EnvelopeSummary {
            spectrum: self.spectrum.clone(),
            n_block: self.n_block,
            samples: self.samples.len(),
            violations: self.violations,
            max_excess: self.max_excess,
            grid_points: self.curve.len(),
            bound_dominates: self.curve.points.iter().all(|p| p.upper_bound >= p.neg_grf),
            bound_max_gap: gaps.fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Draws `num_samples` overlaps at block dimension `n_block` and compares
/// each against the rate function.
pub fn run_envelope(
    s: &Spectrum,
    n_block: usize,
    num_samples: usize,
    grid_points: usize,
    rng: RngStream,
) -> Result<EnvelopeReport> {
    if n_block < s.rank() {
        return Err(Error::Dimension(format!("n_block = {n_block} is below the rank {}", s.rank())));
    }
    let parts: Vec<(Vec<EtaSample>, usize, f64)> = chunks(num_samples, CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(c, range)| {
            let mut gen = rng.child(c).rng();
            let mut samples = Vec::with_capacity(range.len());
            let mut violations = 0;
            let mut max_excess = f64::NEG_INFINITY;
            for _ in range {
                let sample = sample_eta(s, n_block, &mut gen)?;
                let envelope = grf::grf(s, sample.x)?.neg_grf;
                let excess = sample.y - envelope;
                if excess > ENVELOPE_TOL {
                    violations += 1;
                }
                max_excess = max_excess.max(excess);
                samples.push(sample);
            }
            Ok((samples, violations, max_excess))
        })
        .collect::<Result<_>>()?;

    let mut samples = Vec::with_capacity(num_samples);
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    for (chunk, v, m) in parts {
        samples.extend(chunk);
        violations += v;
        max_excess = max_excess.max(m);
    }
    let curve = grf::grf_curve(s, &grf::uniform_grid(s, grid_points))?;
    Ok(EnvelopeReport {
        spectrum: s.clone(),
        n_block,
        samples,
        curve,
        violations,
        max_excess,
    })
}
