//! Independent numerical solvers for the optimisation problems behind the
//! rate function. They are slow by design and exist to certify the closed
//! forms in [`crate::grf`]:
//!
//! - [`solve_problem1`]: log-det maximisation over pairs of `r x r`
//!   contractions under the overlap constraint (quasi-Newton ascent on pairs
//!   rescaled onto the constraint, multi-start).
//! - [`solve_problem3_grid`]: water-filling by exhaustive grid search.
//! - [`solve_problem4_search`]: water-filling relaxed over weight vectors
//!   majorised by the squared spectrum.

mod bfgs;
mod majorization;
mod matrix_pair;
mod waterfill_grid;

pub use majorization::{project_majorized, solve_problem4_search};
pub use matrix_pair::{kkt_check_problem1, solve_problem1, Problem1Options};
pub use waterfill_grid::{solve_problem3_grid, DEFAULT_GRID_STEPS};

use crate::linalg::ComplexMatrix;
use crate::spectra::Spectrum;
use crate::{Error, Result};

/// Oracles are desk-scale: their search spaces grow quickly with the rank.
pub const MAX_ORACLE_RANK: usize = 3;

/// Problem-specific witness of an oracle optimum.
#[derive(Debug, Clone)]
pub enum Witness {
    MatrixPair {
        psi1: ComplexMatrix,
        psi2: ComplexMatrix,
        /// Multiplier of the overlap constraint at the returned point.
        multiplier: f64,
    },
    Allocation {
        p: Vec<f64>,
    },
    Majorized {
        beta: Vec<f64>,
        p: Vec<f64>,
    },
    /// No feasible point was found.
    Empty,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Best objective value found.
    pub value: f64,
    pub argument: Witness,
    pub iterations: usize,
    pub converged: bool,
}

fn check_rank(s: &Spectrum) -> Result<()> {
    if s.rank() > MAX_ORACLE_RANK {
        return Err(Error::Precondition(format!(
            "oracles support rank <= {MAX_ORACLE_RANK}, got {}",
            s.rank()
        )));
    }
    Ok(())
}
