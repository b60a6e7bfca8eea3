use rayon::prelude::*;

use super::{check_rank, OracleResult, Witness};
use crate::grf::waterfill_weights;
use crate::rng::RngStream;
use crate::spectra::Spectrum;
use crate::{Error, Result};
use rand::Rng;

const RESTARTS: u64 = 8;

/// Maps any vector into the set of non-increasing, non-negative vectors whose
/// partial sums are dominated by `caps` (the partial sums of the majorising
/// vector): sort, clip at zero, then clip each coordinate to the remaining
/// room and to its predecessor.
pub fn project_majorized(beta: &mut [f64], caps: &[f64]) {
    beta.sort_by(|a, b| b.total_cmp(a));
    let mut used = 0.0;
    for k in 0..beta.len() {
        let mut v = beta[k].max(0.0).min(caps[k] - used);
        if k > 0 {
            v = v.min(beta[k - 1]);
        }
        beta[k] = v.max(0.0);
        used += beta[k];
    }
}

struct Relaxation {
    caps: Vec<f64>,
    x: f64,
}

struct Point {
    value: f64,
    p: Vec<f64>,
    /// `d value / d beta_i = p_i / mu_inv`.
    grad: Vec<f64>,
    active: usize,
}

impl Relaxation {
    fn evaluate(&self, beta: &[f64]) -> Option<Point> {
        let positive = beta.iter().take_while(|b| **b > 0.0).count();
        if positive == 0 {
            return None;
        }
        let sol = waterfill_weights(&beta[..positive], self.x).ok()?;
        let mut p = sol.p;
        p.resize(beta.len(), 0.0);
        let grad = p.iter().map(|pi| pi / sol.mu_inv).collect();
        Some(Point { value: sol.j_value, p, grad, active: sol.s })
    }

    /// Coordinates without sensitivity (zero allocation) are pushed as high
    /// as the constraints allow, top-down, which never lowers the objective.
    fn raise_inactive(&self, beta: &mut [f64], active: usize) {
        let mut used: f64 = beta[..active].iter().sum();
        for k in active..beta.len() {
            let mut v = self.caps[k] - used;
            if k > 0 {
                v = v.min(beta[k - 1]);
            }
            beta[k] = v.max(0.0);
            used += beta[k];
        }
    }

    fn start(&self, alpha: &[f64], rng: &mut impl Rng) -> Vec<f64> {
        let mut beta: Vec<f64> = alpha.iter().map(|a| a * rng.random_range(0.2..1.0)).collect();
        project_majorized(&mut beta, &self.caps);
        let total: f64 = beta.iter().sum();
        let full = *self.caps.last().unwrap();
        if total <= self.x {
            // blend toward alpha, halfway past the point where the budget fits
            let theta = (self.x - total) / (full - total);
            let theta = theta + 0.5 * (1.0 - theta);
            for (b, a) in beta.iter_mut().zip(alpha) {
                *b += theta * (a - *b);
            }
        }
        beta
    }

    fn ascend(&self, mut beta: Vec<f64>, budget: usize) -> (Vec<f64>, Point, usize, bool) {
        let mut cur = self.evaluate(&beta).expect("start is feasible");
        let mut step = 1.0;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < budget {
            iterations += 1;
            let mut trial: Vec<f64> = beta.iter().zip(&cur.grad).map(|(b, g)| b + step * g).collect();
            project_majorized(&mut trial, &self.caps);
            match self.evaluate(&trial) {
                Some(next) if next.value > cur.value => {
                    beta = trial;
                    cur = next;
                    step = (step * 2.0).min(1e6);
                    continue;
                }
                _ => step *= 0.5,
            }
            if step < 1e-14 {
                let mut raised = beta.clone();
                self.raise_inactive(&mut raised, cur.active);
                match self.evaluate(&raised) {
                    Some(next) if next.value > cur.value => {
                        beta = raised;
                        cur = next;
                        step = 1.0;
                    }
                    Some(next) if next.value >= cur.value => {
                        beta = raised;
                        cur = next;
                        converged = true;
                        break;
                    }
                    _ => {
                        converged = true;
                        break;
                    }
                }
            }
        }
        (beta, cur, iterations, converged)
    }
}

/// Maximises `sum ln(1 - p_i)` jointly over allocations `0 <= p_i <= 1` and
/// non-increasing, non-negative weights `beta` majorised (partial sums) by
/// `alpha = (lambda_1^2, ..., lambda_r^2)`, subject to `sum beta_i p_i = x`.
///
/// Alternates a projected ascent step on `beta` with exact water-filling of
/// `p` for the current `beta`. Returns the best of several random starts.
pub fn solve_problem4_search(s: &Spectrum, x: f64, budget: usize, stream: RngStream) -> Result<OracleResult> {
    check_rank(s)?;
    let top = s.eta_max();
    if !(x > 0.0 && x <= top) {
        return Err(Error::out_of_domain("x", x, format!("(0, {top}]")));
    }
    let alpha = s.squares();
    let caps: Vec<f64> = s.partial_sums()[1..].to_vec();
    if x == top {
        return Ok(OracleResult {
            value: f64::NEG_INFINITY,
            argument: Witness::Majorized { beta: alpha.clone(), p: vec![1.0; alpha.len()] },
            iterations: 0,
            converged: true,
        });
    }
    let problem = Relaxation { caps, x };
    let per_start = (budget / RESTARTS as usize).max(1);
    let runs: Vec<_> = (0..RESTARTS)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i).rng();
            let start = problem.start(&alpha, &mut rng);
            problem.ascend(start, per_start)
        })
        .collect();
    let iterations = runs.iter().map(|r| r.2).sum();
    let converged = runs.iter().any(|r| r.3);
    let (beta, point, _, _) = runs
        .into_iter()
        .reduce(|a, b| if b.1.value > a.1.value { b } else { a })
        .expect("at least one restart");
    Ok(OracleResult {
        value: point.value,
        argument: Witness::Majorized { beta, p: point.p },
        iterations,
        converged,
    })
}
