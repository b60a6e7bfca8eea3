use super::{check_rank, OracleResult, Witness};
use crate::spectra::Spectrum;
use crate::{Error, Result};

pub const DEFAULT_GRID_STEPS: usize = 400;

/// Zoom passes after the initial grid; each shrinks the cell by `steps / 4`.
const ZOOM_LEVELS: usize = 4;

/// Maximises `sum ln(1 - p_i)` over `0 <= p_i <= 1`, `sum lambda_i^2 p_i = x`
/// by brute force: a grid over `(p_2, ..., p_r)` with `p_1` eliminated
/// through the constraint (its weight is the largest, so grid errors shrink
/// rather than grow), followed by a few zoomed grids around the best feasible
/// node.
pub fn solve_problem3_grid(s: &Spectrum, x: f64, grid_steps: usize) -> Result<OracleResult> {
    check_rank(s)?;
    let top = s.eta_max();
    if !(x > 0.0 && x <= top) {
        return Err(Error::out_of_domain("x", x, format!("(0, {top}]")));
    }
    if grid_steps == 0 {
        return Err(Error::Precondition("grid needs at least one step".into()));
    }
    let w = s.squares();
    let r = w.len();
    if x == top {
        return Ok(OracleResult {
            value: f64::NEG_INFINITY,
            argument: Witness::Allocation { p: vec![1.0; r] },
            iterations: 0,
            converged: true,
        });
    }
    if r == 1 {
        let p = x / w[0];
        return Ok(OracleResult {
            value: (-p).ln_1p(),
            argument: Witness::Allocation { p: vec![p] },
            iterations: 1,
            converged: true,
        });
    }

    let free = r - 1;
    let mut lo = vec![0.0; free];
    let mut hi = vec![1.0; free];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut evaluations = 0;
    for level in 0..=ZOOM_LEVELS {
        let cells: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| (h - l) / grid_steps as f64).collect();
        let mut idx = vec![0usize; free];
        loop {
            let head: Vec<f64> = (0..free).map(|d| lo[d] + cells[d] * idx[d] as f64).collect();
            evaluations += 1;
            if let Some(p) = complete(&w, x, &head) {
                let value: f64 = p.iter().map(|pi| (-pi).ln_1p()).sum();
                if best.as_ref().is_none_or(|(b, _)| value > *b) {
                    best = Some((value, p));
                }
            }
            // odometer over the free coordinates
            let mut d = 0;
            while d < free {
                idx[d] += 1;
                if idx[d] <= grid_steps {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == free {
                break;
            }
        }
        let Some((_, p)) = &best else { break };
        if level < ZOOM_LEVELS {
            for d in 0..free {
                lo[d] = (p[d + 1] - 2.0 * cells[d]).max(0.0);
                hi[d] = (p[d + 1] + 2.0 * cells[d]).min(1.0);
            }
        }
    }

    Ok(match best {
        Some((value, p)) => OracleResult {
            value,
            argument: Witness::Allocation { p },
            iterations: evaluations,
            converged: true,
        },
        None => OracleResult {
            value: f64::NEG_INFINITY,
            argument: Witness::Empty,
            iterations: evaluations,
            converged: false,
        },
    })
}

/// Prepends the allocation of the leading mode implied by the budget, if feasible.
fn complete(w: &[f64], x: f64, tail: &[f64]) -> Option<Vec<f64>> {
    let used: f64 = tail.iter().zip(&w[1..]).map(|(p, wi)| p * wi).sum();
    let first = (x - used) / w[0];
    if !(0.0..=1.0).contains(&first) {
        return None;
    }
    let mut p = Vec::with_capacity(w.len());
    p.push(first);
    p.extend_from_slice(tail);
    Some(p)
}
