use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::format::float;
use crate::linalg::ComplexMatrix;
use crate::rng::RngStream;
use crate::sampling::{build_spike, sample_gaussian};
use crate::spectra::Spectrum;
use crate::{Error, Result};

/// Default decision threshold: the bulk edge `2` plus a finite-size margin.
pub const DEFAULT_THRESHOLD: f64 = 2.05;

/// Largest dimension accepted by [`run_detection`]; each trial is a dense SVD.
pub const MAX_DETECTION_N: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub fn as_str(self) -> &'static str {
        match self {
            Hypothesis::H0 => "H0",
            Hypothesis::H1 => "H1",
        }
    }

    fn stream_index(self) -> u64 {
        match self {
            Hypothesis::H0 => 0,
            Hypothesis::H1 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionTrial {
    pub hypothesis: Hypothesis,
    /// Largest singular value of the observation.
    pub statistic: f64,
    pub decision: Hypothesis,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    Fixed(f64),
    /// Empirical `1 - false_alarm` quantile of the null statistics of the run.
    H0Quantile { false_alarm: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub spectrum: Spectrum,
    pub n: usize,
    /// Trials per hypothesis.
    pub trials: usize,
    /// Threshold actually applied.
    pub threshold: f64,
    pub false_alarm_rate: f64,
    pub miss_rate: f64,
    pub power: f64,
    pub h0_mean: f64,
    pub h0_std: f64,
    pub h1_mean: f64,
    pub h1_std: f64,
}

#[derive(Debug, Clone)]
pub struct DetectionReport {
    /// `trials` null trials followed by `trials` alternative trials.
    pub trials: Vec<DetectionTrial>,
    pub summary: DetectionSummary,
}

impl DetectionReport {
    /// CSV `trial,hypothesis,lambda1,decision`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "trial,hypothesis,lambda1,decision")?;
        for (i, t) in self.trials.iter().enumerate() {
            writeln!(out, "{i},{},{},{}", t.hypothesis.as_str(), float(t.statistic), t.decision.as_str())?;
        }
        Ok(())
    }
}

pub fn largest_singular_value(y: &ComplexMatrix) -> f64 {
    y.singular_values().max()
}

fn check_dimension(s: &Spectrum, n: usize) -> Result<()> {
    if n < s.rank() {
        return Err(Error::Dimension(format!("n = {n} is below the rank {}", s.rank())));
    }
    if n > MAX_DETECTION_N {
        return Err(Error::Precondition(format!("n = {n} exceeds the cap {MAX_DETECTION_N}")));
    }
    Ok(())
}

/// Largest singular values of `count` observations `n x n` under `hypothesis`,
/// with noise entries of variance `1/n`. Trial `t` uses the stream
/// `rng.child(h).child(t)` (`h = 0` for the null), so the null draws do not
/// depend on the spectrum.
pub fn detection_statistics(
    s: &Spectrum,
    n: usize,
    hypothesis: Hypothesis,
    count: usize,
    rng: RngStream,
) -> Result<Vec<f64>> {
    check_dimension(s, n)?;
    let base = rng.child(hypothesis.stream_index());
    (0..count as u64)
        .into_par_iter()
        .map(|t| {
            let mut gen = base.child(t).rng();
            let z = sample_gaussian(n, n, 1.0 / n as f64, &mut gen)?;
            let y = match hypothesis {
                Hypothesis::H0 => z,
                Hypothesis::H1 => build_spike(s, n, &mut gen)? + z,
            };
            Ok(largest_singular_value(&y))
        })
        .collect()
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    } else {
        0.0
    };
    (m, var.sqrt())
}

/// Smallest null statistic `t` such that at most `false_alarm * count` null
/// statistics exceed it.
fn null_quantile(h0: &[f64], false_alarm: f64) -> f64 {
    let mut sorted = h0.to_vec();
    sorted.sort_by(f64::total_cmp);
    let allowed = (false_alarm * sorted.len() as f64).floor() as usize;
    let idx = sorted.len().saturating_sub(allowed + 1);
    sorted[idx]
}

/// GLRT study: `trials` observations under each hypothesis, decided by
/// `lambda_1(Y) > threshold`.
pub fn run_detection(
    s: &Spectrum,
    n: usize,
    trials: usize,
    threshold: Threshold,
    rng: RngStream,
) -> Result<DetectionReport> {
    if trials == 0 {
        return Err(Error::Precondition("at least one trial is required".into()));
    }
    let h0 = detection_statistics(s, n, Hypothesis::H0, trials, rng)?;
    let h1 = detection_statistics(s, n, Hypothesis::H1, trials, rng)?;
    summarize_detection(s, n, &h0, &h1, threshold)
}

/// Builds the report from precomputed null and alternative statistics.
pub fn summarize_detection(s: &Spectrum, n: usize, h0: &[f64], h1: &[f64], threshold: Threshold) -> Result<DetectionReport> {
    if h0.is_empty() || h1.is_empty() {
        return Err(Error::Precondition("both hypotheses need at least one trial".into()));
    }
    let tau = match threshold {
        Threshold::Fixed(t) if t.is_finite() => t,
        Threshold::Fixed(t) => return Err(Error::out_of_domain("threshold", t, "finite reals")),
        Threshold::H0Quantile { false_alarm } if false_alarm > 0.0 && false_alarm < 1.0 => null_quantile(h0, false_alarm),
        Threshold::H0Quantile { false_alarm } => {
            return Err(Error::out_of_domain("false_alarm", false_alarm, "(0, 1)"))
        }
    };
    let decide = |stat: f64| if stat > tau { Hypothesis::H1 } else { Hypothesis::H0 };
    let trials: Vec<DetectionTrial> = h0
        .iter()
        .map(|&v| (Hypothesis::H0, v))
        .chain(h1.iter().map(|&v| (Hypothesis::H1, v)))
        .map(|(hypothesis, statistic)| DetectionTrial { hypothesis, statistic, decision: decide(statistic), n })
        .collect();
    let false_alarms = h0.iter().filter(|&&v| decide(v) == Hypothesis::H1).count();
    let misses = h1.iter().filter(|&&v| decide(v) == Hypothesis::H0).count();
    let (h0_mean, h0_std) = mean_std(h0);
    let (h1_mean, h1_std) = mean_std(h1);
    let miss_rate = misses as f64 / h1.len() as f64;
    Ok(DetectionReport {
        trials,
        summary: DetectionSummary {
            spectrum: s.clone(),
            n,
            trials: h0.len(),
            threshold: tau,
            false_alarm_rate: false_alarms as f64 / h0.len() as f64,
            miss_rate,
            power: 1.0 - miss_rate,
            h0_mean,
            h0_std,
            h1_mean,
            h1_std,
        },
    })
}
