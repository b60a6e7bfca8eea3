//! Closed-form analytics of the overlap `eta`.
//!
//! On the interval `I_k` the rate function reads
//!
//! ```text
//! -I(x) = 2 [ k ln((S_k - |x|) / k) - sum_{i<=k} ln lambda_i^2 ],   S_k = sum_{i<=k} lambda_i^2
//! ```
//!
//! which is twice the optimum `J(x)` of the water-filling problem
//! `max sum ln(1 - p_i)` subject to `sum lambda_i^2 p_i = x`, `0 <= p_i <= 1`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::format::float;
use crate::spectra::{IntervalDecomposition, Spectrum};
use crate::{Error, Result};

/// One sample of the rate function.
///
/// `k` is the interval index of `|x|`; `k = 0` flags the origin, where the
/// value is the continuous extension `0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrfPoint {
    pub x: f64,
    pub neg_grf: f64,
    pub k: usize,
    pub upper_bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GrfCurve {
    pub points: Vec<GrfPoint>,
}

impl GrfCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with header `x,neg_grf,k,upper_bound`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,neg_grf,k,upper_bound")?;
        for p in &self.points {
            writeln!(out, "{},{},{},{}", float(p.x), float(p.neg_grf), p.k, float(p.upper_bound))?;
        }
        Ok(())
    }
}

fn check_domain(s: &Spectrum, x: f64) -> Result<f64> {
    let ax = x.abs();
    let top = s.eta_max();
    if !(ax <= top) {
        return Err(Error::out_of_domain("|x|", ax, format!("[0, {top}]")));
    }
    Ok(ax)
}

/// `k`-th branch of `-I`, evaluated in log space.
fn branch(partial_sums: &[f64], log_weights: &[f64], k: usize, ax: f64) -> f64 {
    let kf = k as f64;
    let log_prod: f64 = log_weights[..k].iter().sum();
    2.0 * (kf * ((partial_sums[k] - ax) / kf).ln() - log_prod)
}

fn log_weights(s: &Spectrum) -> Vec<f64> {
    s.squares().iter().map(|w| w.ln()).collect()
}

/// Rate function at `x`, negated (`-I(x) <= 0`).
pub fn grf(s: &Spectrum, x: f64) -> Result<GrfPoint> {
    let ax = check_domain(s, x)?;
    if ax == 0.0 {
        return Ok(GrfPoint { x, neg_grf: 0.0, k: 0, upper_bound: 0.0 });
    }
    let k = s.interval_index(ax)?;
    let neg_grf = branch(&s.partial_sums(), &log_weights(s), k, ax);
    Ok(GrfPoint {
        x,
        neg_grf,
        k,
        upper_bound: (1.0 - ax / s.eta_max()).ln(),
    })
}

/// Evaluates [`grf`] at every grid value, keeping the grid order.
pub fn grf_curve(s: &Spectrum, x_grid: &[f64]) -> Result<GrfCurve> {
    let points = x_grid.iter().map(|&x| grf(s, x)).collect::<Result<Vec<_>>>()?;
    Ok(GrfCurve { points })
}

/// `count` equispaced points strictly inside `(0, eta_max)`.
pub fn uniform_grid(s: &Spectrum, count: usize) -> Vec<f64> {
    let top = s.eta_max();
    (1..=count).map(|i| top * i as f64 / (count + 1) as f64).collect()
}

/// `ln(1 - |x| / eta_max)`, the rank-agnostic bound on `-I`.
pub fn upper_bound(s: &Spectrum, x: f64) -> Result<f64> {
    let ax = x.abs();
    let top = s.eta_max();
    if !(ax < top) {
        return Err(Error::out_of_domain("|x|", ax, format!("[0, {top})")));
    }
    Ok((1.0 - ax / top).ln())
}

/// Optimal allocation of the water-filling problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterfillSolution {
    /// Allocations `p_i`, non-increasing, zero beyond the active count.
    pub p: Vec<f64>,
    /// Number of strictly positive allocations.
    pub s: usize,
    /// Water level `1 / mu`.
    pub mu_inv: f64,
    /// Optimum `J(x) = sum ln(1 - p_i)`.
    #[serde(with = "crate::grf::extended_float")]
    pub j_value: f64,
}

impl WaterfillSolution {
    /// Multipliers of the `p_i >= 0` constraints: `1 - mu w_i` on inactive
    /// modes, `0` on active ones.
    pub fn deltas(&self, weights: &[f64]) -> Vec<f64> {
        weights
            .iter()
            .enumerate()
            .map(|(i, w)| if i < self.s { 0.0 } else { 1.0 - w / self.mu_inv })
            .collect()
    }

    /// Largest violation of the stationarity and feasibility conditions:
    /// `1/(1-p_i) = w_i / mu_inv` on active modes, `w_i <= mu_inv` on inactive
    /// ones, and the weighted budget `sum w_i p_i = x`.
    pub fn kkt_residual(&self, weights: &[f64], x: f64) -> f64 {
        let mut worst = 0.0f64;
        for (i, (&w, &p)) in weights.iter().zip(&self.p).enumerate() {
            if i < self.s {
                worst = worst.max((1.0 / (1.0 - p) - w / self.mu_inv).abs() * self.mu_inv / w);
            } else {
                worst = worst.max((w - self.mu_inv).max(0.0));
                worst = worst.max(p.abs());
            }
        }
        let budget: f64 = weights.iter().zip(&self.p).map(|(w, p)| w * p).sum();
        worst.max((budget - x).abs())
    }
}

/// Water-filling for arbitrary positive, non-increasing weights.
///
/// The active count is the index of the interval of `(0, sum w]` holding `x`,
/// and the level is `(sum_{i<=s} w_i - x) / s`.
pub fn waterfill_weights(weights: &[f64], x: f64) -> Result<WaterfillSolution> {
    if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Precondition("water-filling weights must be positive".into()));
    }
    if weights.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Precondition("water-filling weights must be non-increasing".into()));
    }
    let intervals = IntervalDecomposition::new(weights);
    let top = intervals.upper();
    if !(x > 0.0 && x <= top) {
        return Err(Error::out_of_domain("x", x, format!("(0, {top}]")));
    }
    let s = intervals.index_of(x)?;
    let head: f64 = weights[..s].iter().fold(0.0, |acc, w| acc + w);
    let mu_inv = (head - x) / s as f64;
    let p: Vec<f64> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| if i < s { 1.0 - mu_inv / w } else { 0.0 })
        .collect();
    let j_value = weights[..s].iter().map(|w| (mu_inv / w).ln()).sum();
    Ok(WaterfillSolution { p, s, mu_inv, j_value })
}

pub fn waterfill(s: &Spectrum, x: f64) -> Result<WaterfillSolution> {
    waterfill_weights(&s.squares(), x)
}

/// `sup_{x in (epsilon, eta_max]} (2x - I(x))`.
///
/// On `I_k` the map is concave with derivative `2 - 2k / (S_k - x)`, so its
/// supremum over the clipped interval is reached at the stationary point
/// `S_k - k` projected onto the interval.
pub fn rate_gap_sup(s: &Spectrum, epsilon: f64) -> Result<f64> {
    let top = s.eta_max();
    if !(epsilon > 0.0 && epsilon < top) {
        return Err(Error::out_of_domain("epsilon", epsilon, format!("(0, {top})")));
    }
    let intervals = s.intervals();
    let sums = s.partial_sums();
    let logs = log_weights(s);
    let mut best = f64::NEG_INFINITY;
    for k in 1..=intervals.len() {
        let (lo, hi) = intervals.bounds(k);
        let lo = lo.max(epsilon);
        if hi <= lo {
            continue;
        }
        let stationary = sums[k] - k as f64;
        let t = stationary.clamp(lo, hi);
        best = best.max(2.0 * t + branch(&sums, &logs, k, t));
    }
    Ok(best)
}

/// Limit bound `(1 / (1 - lambda_1^4))^{r^2}` on the second moment of the
/// likelihood ratio, valid below the detection threshold.
pub fn moment_bound(s: &Spectrum) -> Result<f64> {
    let l1 = s.largest();
    if l1 >= 1.0 {
        return Err(Error::Precondition(format!("bound requires lambda_1 < 1, got {l1}")));
    }
    let r2 = (s.rank() * s.rank()) as f64;
    Ok((-r2 * (1.0 - l1.powi(4)).ln()).exp())
}

/// Coupling constant `beta = (sqrt(r)/2) delta (2 + delta) lambda_1^2`.
pub fn e2_beta(s: &Spectrum, delta: f64) -> f64 {
    (s.rank() as f64).sqrt() / 2.0 * delta * (2.0 + delta) * s.largest().powi(2)
}

/// Bound `(1 / ((1 - beta)^2 - lambda_1^4))^{r^2}` on the concentrated part of
/// the small-overlap term.
pub fn e2_prime_bound(s: &Spectrum, delta: f64) -> Result<f64> {
    let l1 = s.largest();
    if l1 >= 1.0 {
        return Err(Error::Precondition(format!("bound requires lambda_1 < 1, got {l1}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Precondition(format!("delta must lie in (0, 1), got {delta}")));
    }
    let beta = e2_beta(s, delta);
    if beta >= 1.0 {
        return Err(Error::Precondition(format!("beta < 1 fails: beta = {beta}")));
    }
    let margin = (1.0 - beta).powi(2) - l1.powi(4);
    if margin <= 0.0 {
        return Err(Error::Precondition(format!(
            "(1 - beta)^2 > lambda_1^4 fails: (1 - beta)^2 - lambda_1^4 = {margin}"
        )));
    }
    let r2 = (s.rank() * s.rank()) as f64;
    Ok((-r2 * margin.ln()).exp())
}

/// Serialises non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`.
pub mod extended_float {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            ser.serialize_f64(*v)
        } else {
            ser.serialize_str(&crate::format::float(*v))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(de)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => crate::format::parse_float(&t)
                .ok_or_else(|| de::Error::custom(format!("invalid float {t:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three_modes() -> Spectrum {
        Spectrum::new(vec![1.0, 0.7, 0.2]).unwrap()
    }

    fn single(l: f64) -> Spectrum {
        Spectrum::new(vec![l]).unwrap()
    }

    #[test]
    fn grf_examples() {
        let s = three_modes();
        let p = grf(&s, 0.3).unwrap();
        assert_eq!(p.k, 1);
        assert!((p.neg_grf - 2.0 * 0.7f64.ln()).abs() < 1e-14);
        assert!((p.neg_grf - (-0.713349887877465)).abs() < 1e-12);

        let p = grf(&s, 1.0).unwrap();
        assert_eq!(p.k, 2);
        assert!((p.neg_grf - 2.0 * 0.1225f64.ln()).abs() < 1e-13);
        assert!((p.neg_grf - (-4.19928849799471)).abs() < 1e-12);

        assert_eq!(grf(&s, -0.3).unwrap().neg_grf, grf(&s, 0.3).unwrap().neg_grf);
    }

    #[test]
    fn grf_at_origin_and_edge() {
        let s = three_modes();
        let origin = grf(&s, 0.0).unwrap();
        assert_eq!((origin.neg_grf, origin.k), (0.0, 0));
        assert!(grf(&single(0.8), 1e-12).unwrap().neg_grf.abs() < 1e-10);
        let edge = grf(&s, s.eta_max()).unwrap();
        assert_eq!(edge.neg_grf, f64::NEG_INFINITY);
        assert_eq!(edge.k, 3);
        assert!(grf(&s, 1.54).is_err());
        assert!(grf(&s, f64::NAN).is_err());
    }

    #[test]
    fn curve_examples() {
        let s = three_modes();
        let c = grf_curve(&s, &[0.3, 1.0, 1.5]).unwrap();
        assert_eq!(c.points.iter().map(|p| p.k).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(grf_curve(&s, &[]).unwrap().is_empty());
        assert!(grf_curve(&s, &[0.3, s.eta_max() + 1.0]).is_err());
        let grid = uniform_grid(&s, 1000);
        assert_eq!(grid.len(), 1000);
        assert!(grid[0] > 0.0 && grid[999] < 1.53);
    }

    #[test]
    fn curve_csv_layout() {
        let s = three_modes();
        let c = grf_curve(&s, &[0.3, s.eta_max()]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,neg_grf,k,upper_bound");
        assert!(lines[1].starts_with("2.9999999999999999e-1,"));
        assert!(lines[2].ends_with(",3,-inf"));
        assert!(lines[2].contains(",-inf,3,"));
    }

    #[test]
    fn waterfill_examples() {
        let s = three_modes();
        let w = waterfill(&s, 0.3).unwrap();
        assert_eq!(w.s, 1);
        assert!((w.mu_inv - 0.7).abs() < 1e-15);
        assert!((w.p[0] - 0.3).abs() < 1e-15 && w.p[1] == 0.0 && w.p[2] == 0.0);
        assert!((w.j_value - 0.7f64.ln()).abs() < 1e-15);

        let w = waterfill(&s, 1.0).unwrap();
        assert_eq!(w.s, 2);
        assert!((w.mu_inv - 0.245).abs() < 1e-15);
        assert!((w.p[0] - 0.755).abs() < 1e-15);
        assert!((w.p[1] - 0.5).abs() < 1e-15);
        assert!((w.j_value - 0.1225f64.ln()).abs() < 1e-14);

        let w = waterfill(&s, s.eta_max()).unwrap();
        assert_eq!(w.s, 3);
        assert_eq!(w.p, vec![1.0, 1.0, 1.0]);
        assert_eq!(w.j_value, f64::NEG_INFINITY);

        assert!(waterfill(&s, 0.0).is_err());
        assert!(waterfill(&s, -0.3).is_err());
        assert!(waterfill(&s, 1.6).is_err());
    }

    #[test]
    fn waterfill_bracketing_and_deltas() {
        let s = three_modes();
        let w2 = s.squares();
        for x in [0.05, 0.3, 0.6, 1.0, 1.45] {
            let sol = waterfill(&s, x).unwrap();
            let next = w2.get(sol.s).copied().unwrap_or(0.0);
            assert!(next <= sol.mu_inv && sol.mu_inv < w2[sol.s - 1]);
            assert!(sol.kkt_residual(&w2, x) < 1e-12);
            assert!(sol.deltas(&w2).iter().all(|d| *d >= 0.0));
        }
    }

    #[test]
    fn waterfill_solution_json_handles_infinity() {
        let s = three_modes();
        let w = waterfill(&s, s.eta_max()).unwrap();
        let json = serde_json::to_string(&w).unwrap();
        assert!(json.contains("\"j_value\":\"-inf\""));
        let back: WaterfillSolution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn upper_bound_examples() {
        let s = three_modes();
        assert!((upper_bound(&s, 0.765).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(upper_bound(&s, 0.0).unwrap(), 0.0);
        assert!(upper_bound(&s, 1.53).is_err());
        let one = single(0.9);
        for t in [0.1, 0.5, 0.9] {
            let x = t * 0.81;
            assert!(upper_bound(&one, x).unwrap() >= grf(&one, x).unwrap().neg_grf);
        }
    }

    /// Golden-section maximisation of a unimodal function on `[a, b]`.
    fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        f(0.5 * (a + b))
    }

    #[test]
    fn rate_gap_for_supercritical_rank_one() {
        // Independent route: golden-section search of 2x + 2 ln(1 - x/1.44).
        let oracle = golden_max(|x| 2.0 * x + 2.0 * (1.0 - x / 1.44).ln(), 0.01, 1.44 - 1e-12);
        assert!((oracle - 0.150_713_772_824_181_5).abs() < 1e-12);
        let got = rate_gap_sup(&single(1.2), 0.01).unwrap();
        assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
    }

    #[test]
    fn rate_gap_matches_dense_scan() {
        for (values, eps) in [(vec![1.0, 0.7, 0.2], 0.05), (vec![1.4, 1.1, 0.3], 0.2), (vec![0.95, 0.9], 0.01)] {
            let s = Spectrum::new(values).unwrap();
            let top = s.eta_max();
            let scan = (1..200_000)
                .map(|i| eps + (top - eps) * i as f64 / 200_000.0)
                .map(|x| 2.0 * x + grf(&s, x).unwrap().neg_grf)
                .fold(f64::NEG_INFINITY, f64::max);
            let got = rate_gap_sup(&s, eps).unwrap();
            assert!(got >= scan - 1e-12);
            assert!(got - scan < 1e-4, "{got} vs scan {scan}");
        }
    }

    #[test]
    fn rate_gap_edges() {
        assert!(rate_gap_sup(&three_modes(), 0.5).unwrap() < 0.0);
        let s = single(0.9);
        assert!(rate_gap_sup(&s, 0.81 * (1.0 - 1e-12)).unwrap() < -40.0);
        assert!(rate_gap_sup(&s, 0.0).is_err());
        assert!(rate_gap_sup(&s, 0.81).is_err());
    }

    #[test]
    fn moment_bound_examples() {
        assert!((moment_bound(&single(0.9)).unwrap() - 2.907_822_041_291_073).abs() < 1e-12);
        let two = Spectrum::new(vec![0.9, 0.5]).unwrap();
        assert!((moment_bound(&two).unwrap() - 71.494_279_976_826_92).abs() < 1e-9);
        assert!(moment_bound(&single(1.0)).is_err());
    }

    #[test]
    fn e2_prime_bound_examples() {
        let s = single(0.9);
        assert!((e2_beta(&s, 0.05) - 0.0415125).abs() < 1e-14);
        let b = e2_prime_bound(&s, 0.05).unwrap();
        assert!((b - 3.808_097_946_583_085).abs() < 1e-10, "{b}");
        assert!((e2_prime_bound(&s, 1e-9).unwrap() - moment_bound(&s).unwrap()).abs() < 1e-7);
        let err = e2_prime_bound(&s, 0.9).unwrap_err();
        assert!(err.to_string().contains("beta < 1"));
        let err = e2_prime_bound(&s, 0.25).unwrap_err();
        assert!(err.to_string().contains("lambda_1^4"));
        assert!(e2_prime_bound(&single(1.1), 0.01).is_err());
    }

    #[test]
    fn e2_prime_bound_increases_with_delta() {
        let s = Spectrum::new(vec![0.8, 0.3]).unwrap();
        let mut prev = moment_bound(&s).unwrap();
        for i in 1..40 {
            let delta = i as f64 * 0.002;
            let b = e2_prime_bound(&s, delta).unwrap();
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn tied_spectrum_agrees_with_jittered() {
        let tied = Spectrum::new(vec![0.9, 0.6, 0.6]).unwrap();
        let jitter = Spectrum::new(vec![0.9 + 1e-12, 0.6 + 2e-12, 0.6 + 3e-12]).unwrap();
        for i in 1..200 {
            let x = tied.eta_max() * i as f64 / 200.0;
            let a = grf(&tied, x).unwrap().neg_grf;
            let b = grf(&jitter, x).unwrap().neg_grf;
            assert!((a - b).abs() < 1e-6, "x={x}: {a} vs {b}");
            let wa = waterfill(&tied, x).unwrap().j_value;
            let wb = waterfill(&jitter, x).unwrap().j_value;
            assert!((wa - wb).abs() < 1e-6);
        }
    }

    fn spectrum_strategy() -> impl Strategy<Value = Spectrum> {
        prop::collection::vec(0.05f64..2.0, 1..6).prop_map(|v| Spectrum::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn grf_is_twice_waterfill(s in spectrum_strategy(), t in 0.001f64..0.999) {
            let x = t * s.eta_max();
            let g = grf(&s, x).unwrap().neg_grf;
            let j = waterfill(&s, x).unwrap().j_value;
            prop_assert!((g - 2.0 * j).abs() <= 1e-12 * g.abs().max(1e-300));
        }

        #[test]
        fn grf_is_continuous_at_boundaries(s in spectrum_strategy()) {
            let b = s.intervals();
            let sums = s.partial_sums();
            let logs: Vec<f64> = s.squares().iter().map(|w| w.ln()).collect();
            for k in 1..b.len() {
                let (lo, hi) = b.bounds(k);
                if hi <= lo { continue; }
                let left = branch(&sums, &logs, k, hi);
                let right_k = (k + 1..=b.len()).find(|&j| { let (l, h) = b.bounds(j); h > l }).unwrap();
                let right = branch(&sums, &logs, right_k, hi);
                prop_assert!((left - right).abs() < 1e-10, "k={} {} vs {}", k, left, right);
            }
        }

        #[test]
        fn grf_decreasing_and_dominated(s in spectrum_strategy()) {
            let top = s.eta_max();
            let mut prev = 0.0;
            for i in 1..2000 {
                let x = top * i as f64 / 2000.0;
                let p = grf(&s, x).unwrap();
                prop_assert!(p.neg_grf < prev);
                prop_assert!(p.neg_grf <= p.upper_bound);
                prev = p.neg_grf;
            }
        }

        #[test]
        fn waterfill_kkt_certificate(s in spectrum_strategy(), t in 0.001f64..0.999) {
            let x = t * s.eta_max();
            let w2 = s.squares();
            let sol = waterfill(&s, x).unwrap();
            prop_assert!(sol.kkt_residual(&w2, x) < 1e-10);
            prop_assert!(sol.p.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(sol.p[..sol.s].iter().all(|p| *p > 0.0));
        }

        #[test]
        fn gap_sign_follows_threshold(values in prop::collection::vec(0.05f64..0.99, 1..5), eps_t in 0.001f64..0.999) {
            let s = Spectrum::new(values).unwrap();
            prop_assert!(rate_gap_sup(&s, eps_t * s.eta_max()).unwrap() < 0.0);
        }
    }
}
