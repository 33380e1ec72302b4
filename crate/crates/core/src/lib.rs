//! Fisher information and Cramér–Rao bounds for mean-parameter estimation in
//! complex Gaussian noise, and the statistical cost of random compression.
//!
//! A measurement `y ~ CN(x(θ), σ²I)` compressed to `Φy` with a random `Φ`
//! whose distribution is right-unitarily invariant loses Fisher information
//! in a way that does not depend on the signal model:
//!
//! - the normalized FIM `W = J^{-1/2} Ĵ J^{-H/2}` is complex matrix-beta
//!   `CB_p(m, n - m)`;
//! - the per-parameter CRB ratio `(J⁻¹)ᵢᵢ / (Ĵ⁻¹)ᵢᵢ` is `Beta(m - p + 1, n - m)`;
//! - the KL-divergence ratio `D̂ / D` is `Beta(m, n - m)`.
//!
//! | module | contents |
//! |--------|----------|
//! | [`cxla`] | complex dense kernels: bases, projectors, Hermitian roots, log-determinants |
//! | [`sigmodel`] | mean maps and Jacobians, the uniform-line-array model, finite differences |
//! | [`fisher`] | FIM, CRB (projection and principal-angle forms), compressed counterparts, KL forms |
//! | [`randcomp`] | compression ensembles and per-trial RNG streams |
//! | [`betalaw`] | beta / matrix-beta laws, multivariate gamma, closed-form moments |
//! | [`mcharness`] | Monte Carlo campaigns, histograms, Kolmogorov–Smirnov tests |
//! | [`planner`] | minimum measurement counts and concentration ellipses |

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod betalaw;
pub mod cxla;
mod error;
pub mod fisher;
pub mod mcharness;
pub mod planner;
pub mod randcomp;
pub mod sigmodel;
pub(crate) mod summation;

pub use error::{Error, Result};

pub use num_complex::Complex64;

/// Dense complex matrix, column-major.
pub type ComplexMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type ComplexVector = nalgebra::DVector<Complex64>;
