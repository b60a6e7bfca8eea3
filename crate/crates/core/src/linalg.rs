//! Small dense complex linear algebra on top of `nalgebra`.

use nalgebra::{Complex, DMatrix, SymmetricEigen};

use crate::{Error, Result};

pub type C64 = Complex<f64>;

/// Dense complex matrix. Houses the noise, the Haar rotations, the truncated
/// blocks and the spike itself.
pub type ComplexMatrix = DMatrix<C64>;

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `W^{-1/2}` for a Hermitian positive definite `W`, via its eigendecomposition.
pub fn inverse_sqrt_hermitian(w: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = SymmetricEigen::new(w.clone());
    if eig.eigenvalues.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Conditioning("Gram matrix is not positive definite".into()));
    }
    let scale = eig.eigenvalues.map(|v| C64::new(1.0 / v.sqrt(), 0.0));
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&scale) * v.adjoint())
}

/// `ln det(W)` of a Hermitian positive definite matrix, `-inf` when the
/// Cholesky factorisation breaks down.
pub fn log_det_hpd(w: &ComplexMatrix) -> f64 {
    if w.nrows() == 0 {
        return 0.0;
    }
    match cholesky_hpd(w) {
        Some(l) => 2.0 * l.diagonal().iter().map(|d| d.re.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}

/// Lower Cholesky factor of a Hermitian matrix, `None` unless every pivot is
/// strictly positive. (The generic complex factorisation takes square roots of
/// negative pivots without complaint.)
pub fn cholesky_hpd(w: &ComplexMatrix) -> Option<ComplexMatrix> {
    let n = w.nrows();
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = w[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0 && d.is_finite()) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in j + 1..n {
            let mut acc = w[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = acc / djj;
        }
    }
    Some(l)
}

/// Inverse of `L L^*` from its lower Cholesky factor.
pub fn cholesky_inverse(l: &ComplexMatrix) -> Option<ComplexMatrix> {
    let n = l.nrows();
    let linv = l.solve_lower_triangular(&ComplexMatrix::identity(n, n))?;
    Some(linv.adjoint() * linv)
}

/// `ln det(I - psi^* psi)`, `-inf` outside the open unit ball of the spectral norm.
pub fn log_det_complement(psi: &ComplexMatrix) -> f64 {
    let n = psi.ncols();
    let m = ComplexMatrix::identity(n, n) - psi.adjoint() * psi;
    log_det_hpd(&m)
}

pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Largest entry modulus of `a - b`.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Largest entry modulus of `M^* M - I`.
pub fn unitarity_residual(m: &ComplexMatrix) -> f64 {
    let n = m.ncols();
    max_abs_diff(&(m.adjoint() * m), &ComplexMatrix::identity(n, n))
}

/// Diagonal complex matrix with real entries.
pub fn real_diagonal(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    ComplexMatrix::from_fn(n, n, |i, j| if i == j { C64::new(values[i], 0.0) } else { C64::new(0.0, 0.0) })
}

/// `Re Tr(L A L B)` for a real diagonal `L` given by its entries.
pub fn weighted_trace(lambda: &[f64], a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let r = lambda.len();
    let mut acc = 0.0;
    for i in 0..r {
        for j in 0..r {
            acc += lambda[i] * lambda[j] * (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}
