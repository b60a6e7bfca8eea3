//! Dense BFGS minimiser with backtracking, for the handful of real
//! parameters the matrix-pair oracle needs.

pub(crate) struct BfgsOutcome {
    pub x: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub value: f64,
    pub iterations: usize,
    #[cfg_attr(not(test), allow(dead_code))]
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimises `f`, which returns `None` outside its domain. Converged when the
/// largest gradient component falls below `gtol * (1 + |f|)`.
pub(crate) fn minimize<F>(f: F, x0: Vec<f64>, max_iter: usize, gtol: f64) -> BfgsOutcome
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut g) = f(&x).expect("starting point must lie in the domain");
    let mut h = identity(n);
    let mut iterations = 0;
    let mut fresh = true;

    while iterations < max_iter {
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax <= gtol * (1.0 + fx.abs()) {
            return BfgsOutcome { x, value: fx, iterations, converged: true };
        }
        iterations += 1;

        let mut dir: Vec<f64> = (0..n).map(|i| -dot(&h[i], &g)).collect();
        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            h = identity(n);
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&dir, &g);
            fresh = true;
        }
        if fresh {
            // first step along the gradient: cap its length
            let norm = dot(&dir, &dir).sqrt();
            if norm > 0.1 {
                dir.iter_mut().for_each(|d| *d *= 0.1 / norm);
                slope = dot(&dir, &g);
            }
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + t * di).collect();
            if let Some((ft, gt)) = f(&trial) {
                if ft <= fx + 1e-4 * t * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            t *= 0.5;
        }

        let Some((xn, fn_, gn)) = accepted else {
            if fresh {
                // even a short gradient step fails: numerically stationary
                let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let converged = gmax <= 1e3 * gtol * (1.0 + fx.abs());
                return BfgsOutcome { x, value: fx, iterations, converged };
            }
            h = identity(n);
            fresh = true;
            continue;
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                let scale = sy / dot(&y, &y);
                h = identity(n);
                h.iter_mut().enumerate().for_each(|(i, row)| row[i] = scale);
            }
            update_inverse_hessian(&mut h, &s, &y, sy);
            fresh = false;
        }
        x = xn;
        fx = fn_;
        g = gn;
    }
    BfgsOutcome { x, value: fx, iterations, converged: false }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`.
fn update_inverse_hessian(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
