use nalgebra::DMatrix;
use rayon::prelude::*;

use super::bfgs;
use super::{check_rank, OracleResult, Witness};
use crate::linalg::{self, ComplexMatrix, C64};
use crate::rng::RngStream;
use crate::sampling::sample_gaussian;
use crate::spectra::Spectrum;
use crate::{Error, Result};

/// Relative projected gradient below which a restart counts as converged.
const STATIONARITY_TOL: f64 = 1e-9;

/// Quasi-Newton iterations between renormalisations.
const INNER_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct Problem1Options {
    pub restarts: usize,
    /// Spectral norm of the random starting contractions.
    pub start_scale: f64,
}

impl Default for Problem1Options {
    fn default() -> Self {
        Problem1Options { restarts: 32, start_scale: 0.5 }
    }
}

/// Maximises `ln det(I - psi1^* psi1) + ln det(I - psi2^* psi2)` over pairs
/// of `r x r` contractions with `Re Tr(Lambda psi1 Lambda psi2) = x`.
///
/// The constraint is bilinear, so any pair with positive overlap `c` is
/// mapped onto it by scaling both blocks by `sqrt(x / c)`. Each restart runs
/// BFGS on the objective composed with that map, from a random pair of
/// contractions. `budget` caps the total number of quasi-Newton iterations
/// over all restarts; the multiplier is recovered by least squares at the end.
pub fn solve_problem1(s: &Spectrum, x: f64, budget: usize, stream: RngStream) -> Result<OracleResult> {
    solve_problem1_with(s, x, budget, stream, Problem1Options::default())
}

pub fn solve_problem1_with(
    s: &Spectrum,
    x: f64,
    budget: usize,
    stream: RngStream,
    opts: Problem1Options,
) -> Result<OracleResult> {
    check_rank(s)?;
    let top = s.eta_max();
    if !(x > 0.0 && x < top) {
        return Err(Error::out_of_domain("x", x, format!("(0, {top})")));
    }
    let problem = PairProblem { lambda: s.values(), r: s.rank(), x };
    let per_restart = (budget / opts.restarts.max(1)).max(1);

    let runs: Vec<Run> = (0..opts.restarts as u64)
        .into_par_iter()
        .map(|i| problem.run(stream.child(i), per_restart, opts.start_scale))
        .collect();

    let iterations = runs.iter().map(|r| r.iterations).sum();
    let best = runs.into_iter().flatten_best();
    Ok(match best {
        Some(run) => OracleResult {
            value: run.value,
            converged: run.converged,
            iterations,
            argument: Witness::MatrixPair {
                psi1: run.psi1,
                psi2: run.psi2,
                multiplier: run.multiplier,
            },
        },
        None => OracleResult {
            value: f64::NEG_INFINITY,
            argument: Witness::Empty,
            iterations,
            converged: false,
        },
    })
}

struct Run {
    psi1: ComplexMatrix,
    psi2: ComplexMatrix,
    value: f64,
    multiplier: f64,
    iterations: usize,
    converged: bool,
}

trait BestRun {
    fn flatten_best(self) -> Option<Run>;
}

impl<I: Iterator<Item = Run>> BestRun for I {
    /// Highest finite value; ties keep the earliest restart.
    fn flatten_best(self) -> Option<Run> {
        self.filter(|r| r.value.is_finite()).fold(None, |acc, r| match acc {
            Some(a) if a.value >= r.value => Some(a),
            _ => Some(r),
        })
    }
}

struct PairProblem<'a> {
    lambda: &'a [f64],
    r: usize,
    x: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl PairProblem<'_> {
    fn unpack(&self, z: &[f64]) -> (ComplexMatrix, ComplexMatrix) {
        let rr = self.r * self.r;
        let mat = |off: usize| DMatrix::from_fn(self.r, self.r, |i, j| {
            let k = off + 2 * (j * self.r + i);
            C64::new(z[k], z[k + 1])
        });
        (mat(0), mat(2 * rr))
    }

    fn pack(&self, a: &ComplexMatrix, b: &ComplexMatrix) -> Vec<f64> {
        a.iter().chain(b.iter()).flat_map(|c| [c.re, c.im]).collect()
    }

    /// `ln det(I - psi^* psi)` and its real gradient `-2 psi (I - psi^* psi)^{-1}`.
    fn log_det_part(&self, psi: &ComplexMatrix) -> Option<(f64, ComplexMatrix)> {
        let m = ComplexMatrix::identity(self.r, self.r) - psi.adjoint() * psi;
        let l = linalg::cholesky_hpd(&m)?;
        let value = 2.0 * l.diagonal().iter().map(|d| d.re.ln()).sum::<f64>();
        if !value.is_finite() {
            return None;
        }
        let grad = psi * linalg::cholesky_inverse(&l)? * C64::new(-2.0, 0.0);
        Some((value, grad))
    }

    /// Real gradient of `Re Tr(Lambda a Lambda b)` with respect to `a`:
    /// `Lambda b^* Lambda`.
    fn constraint_grad(&self, b: &ComplexMatrix) -> ComplexMatrix {
        DMatrix::from_fn(self.r, self.r, |i, j| b[(j, i)].conj() * (self.lambda[i] * self.lambda[j]))
    }

    fn overlap(&self, a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        linalg::weighted_trace(self.lambda, a, b)
    }

    /// Scale factor putting the pair on the constraint, if its overlap is positive.
    fn feasible_scale(&self, a: &ComplexMatrix, b: &ComplexMatrix) -> Option<f64> {
        let c = self.overlap(a, b);
        (c > 0.0).then(|| (self.x / c).sqrt())
    }

    /// Negated objective of the rescaled pair and its gradient, for minimisation.
    fn reduced(&self, z: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (a, b) = self.unpack(z);
        let c = self.overlap(&a, &b);
        if !(c > 0.0) {
            return None;
        }
        let u = (self.x / c).sqrt();
        let cu = C64::new(u, 0.0);
        let (fa, ga) = self.log_det_part(&(&a * cu))?;
        let (fb, gb) = self.log_det_part(&(&b * cu))?;
        let (pa, pb) = (self.pack(&ga, &gb), self.pack(&a, &b));
        // d u / d(a, b) = -(u / 2c) grad c
        let radial = dot(&pa, &pb) * u / (2.0 * c);
        let gc = self.pack(&self.constraint_grad(&b), &self.constraint_grad(&a));
        let grad = pa.iter().zip(&gc).map(|(g, k)| -(u * g - radial * k)).collect();
        Some((-(fa + fb), grad))
    }

    fn random_start(&self, rng: &mut impl rand::Rng, scale: f64) -> ComplexMatrix {
        let g = sample_gaussian(self.r, self.r, 1.0, rng).expect("unit variance");
        let norm = linalg::spectral_norm(&g);
        g * C64::new(scale / norm, 0.0)
    }

    /// Random pair already on the constraint: a random pair of contractions
    /// blended with the scaled identity pair `(t I, t I)`, `t^2 = x / eta_max`,
    /// which is always feasible. The blend weight halves until the rescaled
    /// pair lies inside the unit ball.
    fn feasible_start(&self, rng: &mut impl rand::Rng, scale: f64) -> Option<Vec<f64>> {
        let eta_max: f64 = self.lambda.iter().map(|l| l * l).sum();
        let t = C64::new((self.x / eta_max).sqrt(), 0.0);
        let centre = ComplexMatrix::identity(self.r, self.r) * t;
        let ra = self.random_start(rng, scale);
        let rb = self.random_start(rng, scale);
        let mut theta: f64 = rng.random_range(0.0..1.0);
        for _ in 0..60 {
            let w = C64::new(theta, 0.0);
            let a = &centre + (&ra - &centre) * w;
            let b = &centre + (&rb - &centre) * w;
            if let Some(u) = self.feasible_scale(&a, &b) {
                let z = self.pack(&(a * C64::new(u, 0.0)), &(b * C64::new(u, 0.0)));
                if self.reduced(&z).is_some() {
                    return Some(z);
                }
            }
            theta *= 0.5;
        }
        None
    }

    fn run(&self, stream: RngStream, budget: usize, scale: f64) -> Run {
        let mut rng = stream.rng();
        let failed = |iterations| Run {
            psi1: ComplexMatrix::zeros(self.r, self.r),
            psi2: ComplexMatrix::zeros(self.r, self.r),
            value: f64::NEG_INFINITY,
            multiplier: f64::NAN,
            iterations,
            converged: false,
        };
        let Some(mut z) = self.feasible_start(&mut rng, scale) else {
            return failed(0);
        };
        let mut used = 0;
        let mut converged = false;
        while used < budget {
            let out = bfgs::minimize(|v| self.reduced(v), z, (budget - used).min(INNER_ITERATIONS), 1e-13);
            used += out.iterations.max(1);
            // land exactly on the constraint so the scale stays near one
            let (a, b) = self.unpack(&out.x);
            let u = C64::new(self.feasible_scale(&a, &b).expect("iterates stay feasible"), 0.0);
            let (a, b) = (a * u, b * u);
            z = self.pack(&a, &b);
            if self.stationarity(&a, &b).is_some_and(|(_, res)| res <= STATIONARITY_TOL) {
                converged = true;
                break;
            }
            if out.iterations == 0 {
                break;
            }
        }
        let (a, b) = self.unpack(&z);
        let value = linalg::log_det_complement(&a) + linalg::log_det_complement(&b);
        let Some((nu, _)) = self.stationarity(&a, &b) else {
            return failed(used);
        };
        Run {
            psi1: a,
            psi2: b,
            value,
            // the real multiplier is twice the one in the stationarity
            // equations checked by `kkt_check_problem1`
            multiplier: nu / 2.0,
            iterations: used,
            converged,
        }
    }

    /// Least-squares multiplier `nu` for `grad f + nu grad c = 0` at a feasible
    /// point, and the remaining relative gradient `|grad f + nu grad c| / (1 + |grad f|)`.
    fn stationarity(&self, a: &ComplexMatrix, b: &ComplexMatrix) -> Option<(f64, f64)> {
        let (_, ga) = self.log_det_part(a)?;
        let (_, gb) = self.log_det_part(b)?;
        let gf = self.pack(&ga, &gb);
        let gc = self.pack(&self.constraint_grad(b), &self.constraint_grad(a));
        let cc = dot(&gc, &gc);
        if cc == 0.0 {
            return None;
        }
        let nu = -dot(&gf, &gc) / cc;
        let fmax = gf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rmax = gf.iter().zip(&gc).fold(0.0f64, |m, (f, c)| m.max((f + nu * c).abs()));
        Some((nu, rmax / (1.0 + fmax)))
    }
}

/// Largest entry residual of the stationarity conditions
/// `mu Lambda psi2 Lambda = psi1^* (I - psi1 psi1^*)^{-1}` and the same with the
/// roles of `psi1` and `psi2` exchanged.
pub fn kkt_check_problem1(s: &Spectrum, psi1: &ComplexMatrix, psi2: &ComplexMatrix, mu: f64) -> Result<f64> {
    let r = s.rank();
    for psi in [psi1, psi2] {
        if psi.nrows() != r || psi.ncols() != r {
            return Err(Error::Dimension(format!("expected {r} x {r} blocks, got {} x {}", psi.nrows(), psi.ncols())));
        }
    }
    let lam = linalg::real_diagonal(s.values());
    let side = |p: &ComplexMatrix, q: &ComplexMatrix| -> Result<f64> {
        let m = ComplexMatrix::identity(r, r) - p * p.adjoint();
        let ev = linalg::hermitian_eigenvalues(&m);
        let (lo, hi) = (ev[0], ev[r - 1]);
        if !(lo > 1e-12 * hi) {
            return Err(Error::Conditioning(format!(
                "I - psi psi^* is singular or ill-conditioned (eigenvalues in [{lo:e}, {hi:e}])"
            )));
        }
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::Conditioning("I - psi psi^* is not invertible".into()))?;
        let lhs = &lam * q * &lam * C64::new(mu, 0.0);
        Ok(linalg::max_abs_diff(&lhs, &(p.adjoint() * inv)))
    };
    Ok(side(psi1, psi2)?.max(side(psi2, psi1)?))
}
