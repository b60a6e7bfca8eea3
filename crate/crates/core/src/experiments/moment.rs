use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{chunks, CHUNK};
use crate::grf::extended_float;
use crate::rng::RngStream;
use crate::sampling::sample_eta;
use crate::spectra::Spectrum;
use crate::{Error, Result};

/// Largest exponent whose exponential is a finite `f64`.
const LOG_MAX: f64 = 709.782_712_893_384;

/// Empirical `E[exp(2 n eta)]`, split at `eta = epsilon` into
/// `e1_part = E[exp(2 n eta) 1{eta > epsilon}]` and `e2_part` (the rest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub spectrum: Spectrum,
    pub n: usize,
    pub samples: usize,
    /// `e1_part + e2_part`; infinite when the average overflows `f64`.
    #[serde(with = "extended_float")]
    pub mean: f64,
    #[serde(with = "extended_float")]
    pub e1_part: f64,
    #[serde(with = "extended_float")]
    pub e2_part: f64,
    pub epsilon: f64,
    /// Natural log of `mean`, always finite for a non-empty run.
    #[serde(with = "extended_float")]
    pub log_mean: f64,
    #[serde(with = "extended_float")]
    pub log_e1: f64,
    #[serde(with = "extended_float")]
    pub log_e2: f64,
    /// Samples whose own term `exp(2 n eta)` exceeds the `f64` range.
    pub clamped: usize,
}

/// Running log-sum-exp.
#[derive(Debug, Clone, Copy, PartialEq)]
struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    const EMPTY: LogSum = LogSum { max: f64::NEG_INFINITY, scaled: 0.0 };

    fn push(&mut self, v: f64) {
        self.merge(LogSum { max: v, scaled: 1.0 });
    }

    fn merge(&mut self, other: LogSum) {
        if other.scaled == 0.0 {
            return;
        }
        if self.scaled == 0.0 {
            *self = other;
        } else if other.max > self.max {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        } else {
            self.scaled += other.scaled * (other.max - self.max).exp();
        }
    }

    fn ln(&self) -> f64 {
        if self.scaled == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Per-chunk contribution to a [`MomentEstimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPartial {
    above: LogSum,
    below: LogSum,
    count: usize,
    clamped: usize,
}

impl MomentPartial {
    fn empty() -> Self {
        MomentPartial { above: LogSum::EMPTY, below: LogSum::EMPTY, count: 0, clamped: 0 }
    }

    fn merge(&mut self, other: &MomentPartial) {
        self.above.merge(other.above);
        self.below.merge(other.below);
        self.count += other.count;
        self.clamped += other.clamped;
    }
}

/// Per-chunk partial sums of `run_moment`, in chunk order.
pub fn run_moment_chunks(
    s: &Spectrum,
    n: usize,
    num_samples: usize,
    epsilon: f64,
    rng: RngStream,
) -> Result<Vec<MomentPartial>> {
    if n < s.rank() {
        return Err(Error::Dimension(format!("n = {n} is below the rank {}", s.rank())));
    }
    let top = s.eta_max();
    if !(epsilon > 0.0 && epsilon < top) {
        return Err(Error::out_of_domain("epsilon", epsilon, format!("(0, {top})")));
    }
    let scale = 2.0 * n as f64;
    chunks(num_samples, CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(c, range)| {
            let mut gen = rng.child(c).rng();
            let mut part = MomentPartial::empty();
            for _ in range {
                let x = sample_eta(s, n, &mut gen)?.x;
                let exponent = scale * x;
                if exponent > LOG_MAX {
                    part.clamped += 1;
                }
                if x > epsilon {
                    part.above.push(exponent);
                } else {
                    part.below.push(exponent);
                }
                part.count += 1;
            }
            Ok(part)
        })
        .collect()
}

/// Merges partial sums, in the given order, into an estimate.
pub fn combine_moment(s: &Spectrum, n: usize, epsilon: f64, parts: &[MomentPartial]) -> MomentEstimate {
    let mut total = MomentPartial::empty();
    for p in parts {
        total.merge(p);
    }
    let log_count = (total.count as f64).ln();
    let log_e1 = total.above.ln() - log_count;
    let log_e2 = total.below.ln() - log_count;
    let mut both = total.above;
    both.merge(total.below);
    let e1_part = log_e1.exp();
    let e2_part = log_e2.exp();
    MomentEstimate {
        spectrum: s.clone(),
        n,
        samples: total.count,
        mean: e1_part + e2_part,
        e1_part,
        e2_part,
        epsilon,
        log_mean: both.ln() - log_count,
        log_e1,
        log_e2,
        clamped: total.clamped,
    }
}

/// Estimates `E[exp(2 n eta)]` from `num_samples` overlaps drawn at block
/// dimension `n`. Terms are accumulated in log space; samples whose term
/// alone overflows are counted in `clamped`.
pub fn run_moment(s: &Spectrum, n: usize, num_samples: usize, epsilon: f64, rng: RngStream) -> Result<MomentEstimate> {
    let parts = run_moment_chunks(s, n, num_samples, epsilon, rng)?;
    Ok(combine_moment(s, n, epsilon, &parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_matches_direct_sum() {
        let vals = [0.3, -1.2, 2.5, 0.0, 1.1];
        let mut acc = LogSum::EMPTY;
        vals.iter().for_each(|v| acc.push(*v));
        let direct: f64 = vals.iter().map(|v| v.exp()).sum();
        assert!((acc.ln() - direct.ln()).abs() < 1e-14);
        assert_eq!(LogSum::EMPTY.ln(), f64::NEG_INFINITY);
    }

    #[test]
    fn parts_sum_to_mean() {
        let s = Spectrum::new(vec![0.5]).unwrap();
        let est = run_moment(&s, 10, 10_000, 0.05, RngStream::new(1, 0)).unwrap();
        assert_eq!(est.samples, 10_000);
        assert!(est.e1_part >= 0.0 && est.e2_part >= 0.0);
        assert!((est.mean - (est.e1_part + est.e2_part)).abs() <= 1e-12 * est.mean);
        assert!((est.log_mean - est.mean.ln()).abs() < 1e-12);
        assert_eq!(est.clamped, 0);
        // subcritical: the moment stays near the asymptotic bound
        assert!(est.mean > 0.9 && est.mean < 1.3, "{est:?}");
    }

    #[test]
    fn order_of_partials_does_not_matter() {
        let s = Spectrum::new(vec![0.9, 0.4]).unwrap();
        let mut parts = run_moment_chunks(&s, 12, 5 * CHUNK + 11, 0.1, RngStream::new(2, 0)).unwrap();
        let forward = combine_moment(&s, 12, 0.1, &parts);
        parts.reverse();
        parts.swap(1, 3);
        let shuffled = combine_moment(&s, 12, 0.1, &parts);
        assert!((forward.mean - shuffled.mean).abs() <= 1e-12 * forward.mean);
        assert_eq!(forward.samples, shuffled.samples);
    }

    #[test]
    fn overflow_is_flagged_not_saturated() {
        let s = Spectrum::new(vec![30.0]).unwrap();
        let est = run_moment(&s, 20, 2_000, 0.5, RngStream::new(3, 0)).unwrap();
        assert!(est.clamped > 0);
        assert!(est.log_mean.is_finite() && est.log_mean > LOG_MAX);
        assert_eq!(est.mean, f64::INFINITY);
        let json = serde_json::to_string(&est).unwrap();
        assert!(json.contains("\"mean\":\"inf\""));
    }

    #[test]
    fn domain_checks() {
        let s = Spectrum::new(vec![0.5]).unwrap();
        assert!(run_moment(&s, 10, 10, 0.0, RngStream::new(0, 0)).is_err());
        assert!(run_moment(&s, 10, 10, 0.3, RngStream::new(0, 0)).is_err());
        assert!(run_moment(&Spectrum::new(vec![0.5, 0.4]).unwrap(), 1, 10, 0.1, RngStream::new(0, 0)).is_err());
    }
}
