//! Numerical laboratory for detecting a low-rank complex matrix buried in
//! i.i.d. complex Gaussian noise.
//!
//! The crate is organised around the overlap
//! `eta = Re Tr(Lambda Psi_1 Lambda Psi_2)` between two independent truncated
//! Haar blocks, whose exponential moment `E[exp(2 n eta)]` is the second moment
//! of the likelihood ratio:
//!
//! - [`spectra`]: validated spike spectra and the interval decomposition of
//!   `(0, eta_max]`.
//! - [`grf`]: closed-form rate function of `eta`, the water-filling solution it
//!   reduces to, the Varadhan gap and the moment bounds.
//! - [`sampling`]: complex Gaussian, Haar and truncated-Haar samplers.
//! - [`oracle`]: slow, independent numerical solvers used to certify the
//!   closed forms.
//! - [`experiments`]: Monte Carlo drivers (envelope cloud, GLRT detection,
//!   second-moment estimate).

mod error;
pub mod experiments;
pub mod format;
pub mod grf;
pub mod linalg;
pub mod oracle;
pub mod rng;
pub mod sampling;
pub mod spectra;

pub use error::{Error, Result};
pub use grf::{GrfCurve, GrfPoint, WaterfillSolution};
pub use linalg::{ComplexMatrix, C64};
pub use rng::RngStream;
pub use sampling::EtaSample;
pub use spectra::{IntervalDecomposition, Spectrum};
