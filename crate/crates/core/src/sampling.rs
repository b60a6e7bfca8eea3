//! Random matrix generators.
//!
//! The upper `r x r` block of an `n x n` Haar unitary is drawn without forming
//! the unitary: with `G~` an `n x r` matrix of unit complex Gaussians and `G`
//! its top `r x r` block, `G (G~^* G~)^{-1/2}` has the same law.

use std::io::{self, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::format::float;
use crate::linalg::{self, ComplexMatrix, C64};
use crate::spectra::Spectrum;
use crate::{Error, Result};

/// One draw of the overlap and of the log-det objective at the drawn pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaSample {
    /// `Re Tr(Lambda Psi_1 Lambda Psi_2)`.
    pub x: f64,
    /// `sum_i ln det(I - Psi_i^* Psi_i)`.
    pub y: f64,
}

/// CSV `sample_id,x,y`.
pub fn write_samples_csv<W: Write>(samples: &[EtaSample], mut out: W) -> io::Result<()> {
    writeln!(out, "sample_id,x,y")?;
    for (i, s) in samples.iter().enumerate() {
        writeln!(out, "{i},{},{}", float(s.x), float(s.y))?;
    }
    Ok(())
}

fn standard_complex<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * scale, im * scale)
}

/// `n1 x n2` matrix of i.i.d. circular complex normals with `E|z|^2 = variance`.
///
/// Entries are drawn in column-major order.
pub fn sample_gaussian<R: Rng + ?Sized>(n1: usize, n2: usize, variance: f64, rng: &mut R) -> Result<ComplexMatrix> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::Precondition(format!("variance must be positive, got {variance}")));
    }
    let scale = (variance / 2.0).sqrt();
    Ok(DMatrix::from_fn(n1, n2, |_, _| standard_complex(rng, scale)))
}

/// First `r` columns of an `n x n` Haar unitary: Householder QR of an
/// `n x r` Gaussian, with each column rotated so that `R` has a positive real
/// diagonal.
pub fn sample_haar_columns<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Result<ComplexMatrix> {
    if r == 0 || n < r {
        return Err(Error::Dimension(format!("need n >= r >= 1, got n = {n}, r = {r}")));
    }
    let g = sample_gaussian(n, r, 1.0, rng)?;
    let qr = g.qr();
    let mut q = qr.q();
    let rmat = qr.r();
    for j in 0..r {
        let d = rmat[(j, j)];
        let norm = d.norm();
        if norm > 0.0 {
            let mut col = q.column_mut(j);
            col *= d / norm;
        }
    }
    Ok(q)
}

/// Haar-distributed `n x n` unitary.
pub fn sample_haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ComplexMatrix> {
    sample_haar_columns(n, n, rng)
}

/// A truncated Haar block together with `ln det(I - Psi^* Psi)`.
#[derive(Debug, Clone)]
pub struct TruncatedBlock {
    pub psi: ComplexMatrix,
    /// Computed as `ln det(H^* H) - ln det(G~^* G~)` with `H` the bottom
    /// `n - r` rows, which equals `ln det(I - Psi^* Psi)` without cancellation.
    pub log_det_complement: f64,
}

pub fn sample_truncated_block_with_logdet<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Result<TruncatedBlock> {
    if r == 0 || n < r {
        return Err(Error::Dimension(format!("need n >= r >= 1, got n = {n}, r = {r}")));
    }
    let g_full = sample_gaussian(n, r, 1.0, rng)?;
    let gram = g_full.adjoint() * &g_full;
    let top = g_full.rows(0, r);
    let psi = top * linalg::inverse_sqrt_hermitian(&gram)?;
    let log_det_complement = if n - r < r {
        // I - Psi^* Psi has rank at most n - r < r.
        f64::NEG_INFINITY
    } else {
        let bottom = g_full.rows(r, n - r);
        let h = bottom.adjoint() * bottom;
        linalg::log_det_hpd(&h) - linalg::log_det_hpd(&gram)
    };
    Ok(TruncatedBlock { psi, log_det_complement })
}

/// Upper `r x r` block of an `n x n` Haar unitary.
pub fn sample_truncated_block<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Result<ComplexMatrix> {
    Ok(sample_truncated_block_with_logdet(n, r, rng)?.psi)
}

/// Spike `X_0 = U Lambda V^*` with Haar-distributed singular vectors.
pub fn build_spike<R: Rng + ?Sized>(s: &Spectrum, n: usize, rng: &mut R) -> Result<ComplexMatrix> {
    let r = s.rank();
    let u = sample_haar_columns(n, r, rng)?;
    let v = sample_haar_columns(n, r, rng)?;
    let mut ul = u;
    for (j, &l) in s.values().iter().enumerate() {
        for e in ul.column_mut(j).iter_mut() {
            *e *= l;
        }
    }
    Ok(ul * v.adjoint())
}

/// One overlap sample at block dimension `n`.
pub fn sample_eta<R: Rng + ?Sized>(s: &Spectrum, n: usize, rng: &mut R) -> Result<EtaSample> {
    let r = s.rank();
    let b1 = sample_truncated_block_with_logdet(n, r, rng)?;
    let b2 = sample_truncated_block_with_logdet(n, r, rng)?;
    Ok(EtaSample {
        x: linalg::weighted_trace(s.values(), &b1.psi, &b2.psi),
        y: b1.log_det_complement + b2.log_det_complement,
    })
}

/// `|| G~^* G~ / n - I ||_2` for a fresh `n x r` unit Gaussian `G~`.
pub fn gram_deviation<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Result<f64> {
    if r == 0 || n < r {
        return Err(Error::Dimension(format!("need n >= r >= 1, got n = {n}, r = {r}")));
    }
    let g = sample_gaussian(n, r, 1.0, rng)?;
    let gram = (g.adjoint() * &g) / C64::new(n as f64, 0.0);
    Ok(linalg::hermitian_eigenvalues(&gram)
        .into_iter()
        .map(|e| (e - 1.0).abs())
        .fold(0.0, f64::max))
}
