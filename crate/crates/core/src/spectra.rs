//! Spike spectra and the partition of `(0, eta_max]` into the intervals on
//! which the water-filling solution keeps a fixed number of active modes.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Ordered positive singular values `lambda_1 >= ... >= lambda_r` of the spike.
///
/// The spectrum does not depend on the matrix dimension: every analytic
/// quantity in the crate is a function of these `r` numbers only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Validates and sorts the values in non-increasing order.
    pub fn new(values: impl Into<Vec<f64>>) -> Result<Self> {
        let mut values = values.into();
        if values.is_empty() {
            return Err(Error::InvalidSpectrum("at least one singular value is required".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "singular values must be finite and strictly positive, got {bad}"
            )));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Spectrum { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    /// Squared singular values, in the same (descending) order.
    pub fn squares(&self) -> Vec<f64> {
        self.values.iter().map(|v| v * v).collect()
    }

    /// Partial sums `S_k = sum_{i<=k} lambda_i^2` for `k = 0..=r`, accumulated
    /// in ascending index order. `S_r` is bit-identical to [`Spectrum::eta_max`].
    pub fn partial_sums(&self) -> Vec<f64> {
        let mut sums = Vec::with_capacity(self.values.len() + 1);
        let mut acc = 0.0;
        sums.push(acc);
        for v in &self.values {
            acc += v * v;
            sums.push(acc);
        }
        sums
    }

    /// Largest possible overlap `|eta|`, `sum_j lambda_j^2`.
    pub fn eta_max(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc + v * v)
    }

    pub fn intervals(&self) -> IntervalDecomposition {
        IntervalDecomposition::new(&self.squares())
    }

    /// Index `k` (1-based) of the interval containing `|x|`.
    pub fn interval_index(&self, x: f64) -> Result<usize> {
        self.intervals().index_of(x)
    }

    /// Renders the spectrum as the comma separated list accepted on the
    /// command line.
    pub fn to_flag_value(&self) -> String {
        self.values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl TryFrom<Vec<f64>> for Spectrum {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Spectrum::new(values)
    }
}

impl From<Spectrum> for Vec<f64> {
    fn from(s: Spectrum) -> Self {
        s.values
    }
}

impl std::str::FromStr for Spectrum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<f64>()
                    .map_err(|_| Error::InvalidSpectrum(format!("cannot parse {tok:?} as a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        Spectrum::new(values)
    }
}

/// Endpoints `0 = b_0 <= b_1 <= ... <= b_r = eta_max` with `I_k = (b_{k-1}, b_k]`.
///
/// For `k < r`, `b_k = sum_{i=1}^{k+1} (lambda_i^2 - lambda_{k+1}^2)`. Tied
/// singular values give empty intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalDecomposition {
    boundaries: Vec<f64>,
}

impl IntervalDecomposition {
    /// Builds the decomposition for a descending list of positive weights
    /// (squared singular values in the usual case).
    pub(crate) fn new(weights: &[f64]) -> Self {
        let r = weights.len();
        let mut boundaries = Vec::with_capacity(r + 1);
        boundaries.push(0.0);
        for k in 1..r {
            let floor = weights[k];
            let b = weights[..=k].iter().fold(0.0, |acc, w| acc + (w - floor));
            boundaries.push(b);
        }
        boundaries.push(weights.iter().fold(0.0, |acc, w| acc + w));
        IntervalDecomposition { boundaries }
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn len(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn upper(&self) -> f64 {
        *self.boundaries.last().expect("at least two boundaries")
    }

    /// `(b_{k-1}, b_k)` for a 1-based interval index.
    pub fn bounds(&self, k: usize) -> (f64, f64) {
        (self.boundaries[k - 1], self.boundaries[k])
    }

    pub fn index_of(&self, x: f64) -> Result<usize> {
        let ax = x.abs();
        let top = self.upper();
        if !(ax > 0.0 && ax <= top) {
            return Err(Error::out_of_domain("|x|", ax, format!("(0, {top}]")));
        }
        (1..=self.len())
            .find(|&k| {
                let (lo, hi) = self.bounds(k);
                lo < ax && ax <= hi
            })
            .ok_or_else(|| Error::out_of_domain("|x|", ax, format!("(0, {top}]")))
    }

    /// `count` abscissae spread over every non-empty interval: each interval
    /// receives an equal share (the last one absorbs the remainder) placed at
    /// `lo + (hi - lo) * j / (m + 1)`.
    pub fn spread(&self, count: usize) -> Vec<f64> {
        let nonempty: Vec<usize> = (1..=self.len())
            .filter(|&k| {
                let (lo, hi) = self.bounds(k);
                hi > lo
            })
            .collect();
        let share = count / nonempty.len();
        let mut points = Vec::with_capacity(count);
        for (pos, &k) in nonempty.iter().enumerate() {
            let m = if pos + 1 == nonempty.len() {
                count - share * (nonempty.len() - 1)
            } else {
                share
            };
            let (lo, hi) = self.bounds(k);
            points.extend((1..=m).map(|j| lo + (hi - lo) * j as f64 / (m + 1) as f64));
        }
        points
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three_modes() -> Spectrum {
        Spectrum::new(vec![1.0, 0.7, 0.2]).unwrap()
    }

    #[test]
    fn new_sorts_descending() {
        assert_eq!(three_modes().values(), &[1.0, 0.7, 0.2]);
        let s = Spectrum::new(vec![0.2, 1.0, 0.7]).unwrap();
        assert_eq!(s.values(), &[1.0, 0.7, 0.2]);
    }

    #[test]
    fn new_rejects_invalid_values() {
        assert!(Spectrum::new(vec![1.0, 0.0, 0.5]).is_err());
        assert!(Spectrum::new(vec![1.0, -0.1]).is_err());
        assert!(Spectrum::new(vec![f64::NAN]).is_err());
        assert!(Spectrum::new(vec![f64::INFINITY]).is_err());
        assert!(Spectrum::new(Vec::<f64>::new()).is_err());
    }

    #[test]
    fn parses_flag_value() {
        let s: Spectrum = "1, 0.7,0.2".parse().unwrap();
        assert_eq!(s, three_modes());
        assert!("1,abc".parse::<Spectrum>().is_err());
        assert_eq!(s.to_flag_value().parse::<Spectrum>().unwrap(), s);
    }

    #[test]
    fn json_is_a_plain_array() {
        let json = serde_json::to_string(&three_modes()).unwrap();
        assert_eq!(json, "[1.0,0.7,0.2]");
        let back: Spectrum = serde_json::from_str("[0.2,1.0,0.7]").unwrap();
        assert_eq!(back, three_modes());
        assert!(serde_json::from_str::<Spectrum>("[1.0,0.0]").is_err());
    }

    #[test]
    fn eta_max_examples() {
        assert!((three_modes().eta_max() - 1.53).abs() < 1e-15);
        assert_eq!(Spectrum::new(vec![1.0]).unwrap().eta_max(), 1.0);
        assert_eq!(Spectrum::new(vec![0.5, 0.5]).unwrap().eta_max(), 0.5);
    }

    #[test]
    fn interval_boundaries() {
        let b = three_modes().intervals();
        let expected = [0.0, 0.51, 1.41, 1.53];
        for (got, want) in b.boundaries().iter().zip(expected) {
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }
        assert_eq!(Spectrum::new(vec![1.0]).unwrap().intervals().boundaries(), &[0.0, 1.0]);
        let c = 0.8;
        let tied = Spectrum::new(vec![c, c]).unwrap().intervals();
        assert_eq!(tied.boundaries(), &[0.0, 0.0, 2.0 * c * c]);
    }

    #[test]
    fn interval_index_examples() {
        let s = three_modes();
        assert_eq!(s.interval_index(0.3).unwrap(), 1);
        assert_eq!(s.interval_index(1.0).unwrap(), 2);
        assert_eq!(s.interval_index(1.53).unwrap(), 3);
        assert_eq!(s.interval_index(-1.0).unwrap(), 2);
        // right endpoints belong to the lower interval
        let b1 = s.intervals().boundaries()[1];
        assert_eq!(s.interval_index(b1).unwrap(), 1);
        assert_eq!(s.interval_index(b1 + 1e-12).unwrap(), 2);
        assert!(s.interval_index(0.0).is_err());
        assert!(s.interval_index(1.5300001).is_err());
        assert!(s.interval_index(f64::NAN).is_err());
    }

    #[test]
    fn tied_values_skip_empty_interval() {
        let s = Spectrum::new(vec![0.9, 0.6, 0.6]).unwrap();
        let b = s.intervals();
        assert_eq!(b.boundaries()[2], b.boundaries()[1] + 0.0);
        let mid = 0.5 * (b.boundaries()[1] + b.boundaries()[3]);
        assert_eq!(s.interval_index(mid).unwrap(), 3);
    }

    #[test]
    fn spread_covers_every_interval() {
        let s = three_modes();
        let b = s.intervals();
        let pts = b.spread(20);
        assert_eq!(pts.len(), 20);
        for k in 1..=3 {
            assert!(pts.iter().any(|&x| b.index_of(x).unwrap() == k));
        }
        assert!(pts.iter().all(|&x| x > 0.0 && x < s.eta_max()));
    }

    fn spectrum_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.05f64..2.0, 1..6)
    }

    proptest! {
        #[test]
        fn intervals_partition_the_domain(values in spectrum_strategy()) {
            let s = Spectrum::new(values).unwrap();
            let b = s.intervals();
            prop_assert_eq!(b.boundaries()[0], 0.0);
            prop_assert_eq!(b.upper(), s.eta_max());
            prop_assert!(b.boundaries().windows(2).all(|w| w[0] <= w[1]));
            // every grid point lands in exactly one interval
            for i in 1..=500 {
                let x = i as f64 / 500.0 * s.eta_max();
                let hits = (1..=b.len())
                    .filter(|&k| { let (lo, hi) = b.bounds(k); lo < x && x <= hi })
                    .count();
                prop_assert_eq!(hits, 1);
                prop_assert!(b.index_of(x).is_ok());
            }
        }

        #[test]
        fn index_is_piecewise_constant(values in spectrum_strategy()) {
            let s = Spectrum::new(values).unwrap();
            let b = s.intervals();
            let mut prev = 1usize;
            let mut prev_x = 0.0;
            for i in 1..=400 {
                let x = i as f64 / 400.0 * s.eta_max();
                let k = b.index_of(x).unwrap();
                prop_assert!(k >= prev);
                // a jump skips only intervals lying strictly between the two samples
                for skipped in prev + 1..k {
                    let (lo, hi) = b.bounds(skipped);
                    prop_assert!(prev_x <= lo && hi < x);
                }
                prev = k;
                prev_x = x;
            }
        }

        #[test]
        fn permutation_invariance(values in spectrum_strategy(), seed in any::<u64>()) {
            let mut shuffled = values.clone();
            let len = shuffled.len();
            let mut state = seed;
            for i in (1..len).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (state >> 33) as usize % (i + 1));
            }
            let a = Spectrum::new(values).unwrap();
            let b = Spectrum::new(shuffled).unwrap();
            prop_assert_eq!(a.intervals(), b.intervals());
            prop_assert_eq!(a, b);
        }
    }
}
