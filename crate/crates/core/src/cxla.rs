//! Complex dense linear algebra: orthonormal bases, orthogonal projectors,
//! Hermitian inverse square roots and log-determinants.
//!
//! Projectors are always built from an orthonormal basis (QR or SVD), never
//! from the normal-equations form `Φᴴ(ΦΦᴴ)⁻¹Φ`.

use nalgebra::{DMatrix, DVector, Dyn, QR};
use num_complex::Complex64;

use crate::{ComplexMatrix, Error, Result};

/// Relative singular-value threshold used for rank decisions.
pub const RANK_TOL: f64 = 1e-10;
/// Absolute slack allowed below zero (and above one) when checking spectra.
pub const PSD_TOL: f64 = 1e-10;
/// Relative eigenvalue floor (times the largest eigenvalue) for positive definiteness.
pub const PD_TOL: f64 = 1e-14;

/// Hermitian matrix with exact conjugate symmetry in storage.
///
/// Construction symmetrizes `(A + Aᴴ)/2`, so `a[(i, j)] == a[(j, i)].conj()`
/// bit for bit and the diagonal is real.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian(ComplexMatrix);

impl Hermitian {
    pub fn new(a: ComplexMatrix) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::BadShape(format!(
                "Hermitian matrix must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        ensure_finite(&a)?;
        let sym = (&a + a.adjoint()).map(|z| z * 0.5);
        Ok(Hermitian(sym))
    }

    pub fn identity(dim: usize) -> Self {
        Hermitian(ComplexMatrix::identity(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| Complex64::new(x, 0.0)));
        Hermitian(ComplexMatrix::from_diagonal(&d))
    }

    /// Gram matrix `AᴴA`.
    pub fn gram(a: &ComplexMatrix) -> Result<Self> {
        Hermitian::new(a.adjoint() * a)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        Hermitian(self.0.map(|z| z * s))
    }

    pub fn sub(&self, other: &Hermitian) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::BadShape(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Hermitian(&self.0 - &other.0))
    }

    /// Real part, a real symmetric matrix.
    pub fn real_part(&self) -> DMatrix<f64> {
        self.0.map(|z| z.re)
    }

    fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| i == j || self.0[(i, j)] == Complex64::new(0.0, 0.0)))
    }

    /// Eigenvalues in ascending order. Diagonal inputs return their diagonal exactly.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = if self.is_diagonal() {
            (0..self.dim()).map(|i| self.0[(i, i)].re).collect()
        } else {
            self.0.clone().symmetric_eigenvalues().iter().copied().collect()
        };
        vals.sort_by(f64::total_cmp);
        vals
    }

    /// Eigen-decomposition `A = V diag(λ) Vᴴ`.
    pub fn eigen(&self) -> (Vec<f64>, ComplexMatrix) {
        let eig = self.0.clone().symmetric_eigen();
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    }

    pub fn check_pd(&self) -> Result<()> {
        let vals = self.eigenvalues();
        check_pd_spectrum(&vals)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.eigenvalues().first().is_some_and(|&l| l >= -tol)
    }

    /// Inverse of a positive definite matrix.
    pub fn inverse(&self) -> Result<Hermitian> {
        let (vals, vecs) = self.eigen();
        check_pd_spectrum(&vals)?;
        Hermitian::new(spectral_apply(&vals, &vecs, |l| 1.0 / l))
    }

    /// `xᴴ A x`, real for Hermitian `A`.
    pub fn quadratic_form(&self, x: &crate::ComplexVector) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::BadShape(format!(
                "vector of length {} against {}x{} matrix",
                x.len(),
                self.dim(),
                self.dim()
            )));
        }
        Ok(x.dotc(&(&self.0 * x)).re)
    }
}

fn check_pd_spectrum(vals: &[f64]) -> Result<()> {
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(min > 0.0 && min > PD_TOL * max) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    Ok(())
}

fn spectral_apply(vals: &[f64], vecs: &ComplexMatrix, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let s = f(l);
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= s);
    }
    scaled * vecs.adjoint()
}

pub fn ensure_finite(a: &ComplexMatrix) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Householder QR of a full-column-rank matrix with `Q` left implicit.
///
/// Applying `Qᴴ` through the reflectors is much cheaper than forming `Q`,
/// which matters when a Monte Carlo trial only needs coordinates in the span.
#[derive(Debug, Clone)]
pub struct ThinQr {
    qr: QR<Complex64, Dyn, Dyn>,
    rows: usize,
    cols: usize,
}

impl ThinQr {
    /// Fails with [`Error::RankDeficient`] when `σ_min/σ_max ≤ RANK_TOL`.
    ///
    /// The singular values are those of the triangular factor, estimated by
    /// power and inverse iteration (in the spirit of LAPACK's condition
    /// estimators) rather than a full SVD.
    pub fn new(m: &ComplexMatrix) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::BadShape("empty matrix".into()));
        }
        ensure_finite(m)?;
        if m.ncols() > m.nrows() {
            return Err(Error::RankDeficient { ratio: 0.0 });
        }
        let (rows, cols) = m.shape();
        let qr = m.clone().qr();
        let ratio = triangular_condition_ratio(&qr.r());
        if !(ratio > RANK_TOL) {
            return Err(Error::RankDeficient { ratio });
        }
        Ok(ThinQr { qr, rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Column count, the dimension of the span.
    pub fn rank(&self) -> usize {
        self.cols
    }

    /// Explicit `Q` (`rows × rank`).
    pub fn q(&self) -> ComplexMatrix {
        self.qr.q()
    }

    /// `Qᴴ B` (`rank × k`).
    pub fn coords(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        if b.nrows() != self.rows {
            return Err(Error::BadShape(format!("{} rows against a basis in dimension {}", b.nrows(), self.rows)));
        }
        let mut work = b.clone();
        self.qr.q_tr_mul(&mut work);
        Ok(work.rows(0, self.cols).into_owned())
    }
}

/// Estimate of `σ_min(R)/σ_max(R)` for square upper-triangular `R`.
fn triangular_condition_ratio(r: &ComplexMatrix) -> f64 {
    const ITERS: usize = 12;
    let k = r.ncols();
    let diag_min = r.diagonal().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if !(diag_min > 0.0) {
        return 0.0;
    }
    let start = || {
        let v = DVector::from_fn(k, |i, _| Complex64::new(1.0 + i as f64 / k as f64, 0.5 - i as f64 / (2 * k) as f64));
        let norm = v.norm();
        v / Complex64::from(norm)
    };
    // Power iteration on RᴴR.
    let mut x = start();
    let mut sigma_max: f64 = 0.0;
    for _ in 0..ITERS {
        let y = r.adjoint() * (r * &x);
        let norm = y.norm();
        sigma_max = sigma_max.max(norm.sqrt());
        x = y / Complex64::from(norm);
    }
    let sigma_max = sigma_max.max(r.diagonal().iter().map(|z| z.norm()).fold(0.0, f64::max));
    // Inverse iteration: (RᴴR)⁻¹ = R⁻¹R⁻ᴴ via two triangular solves.
    let mut x = start();
    let mut inv_max: f64 = 0.0;
    for _ in 0..ITERS {
        let Some(y) = r.ad_solve_upper_triangular(&x) else { return 0.0 };
        let Some(z) = r.solve_upper_triangular(&y) else { return 0.0 };
        let norm = z.norm();
        if !norm.is_finite() {
            return 0.0;
        }
        inv_max = inv_max.max(norm.sqrt());
        x = z / Complex64::from(norm);
    }
    // σ_min ≤ min |R_ii| holds for any triangular matrix.
    let sigma_min = (1.0 / inv_max).min(diag_min);
    sigma_min / sigma_max
}

/// Orthonormal basis `Q` (`QᴴQ = I`) for the column span of a full-column-rank `m`.
pub fn orthonormal_columns(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(ThinQr::new(m)?.q())
}

/// Orthonormal basis for the column span of any `m`, with rank decided at
/// [`RANK_TOL`]. May have zero columns.
pub fn column_basis(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::BadShape("empty matrix".into()));
    }
    ensure_finite(m)?;
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let max = svd.singular_values.max();
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|&(_, &s)| max > 0.0 && s > RANK_TOL * max)
        .map(|(i, _)| i)
        .collect();
    Ok(u.select_columns(keep.iter()))
}

/// Numerical rank of `m` at [`RANK_TOL`].
pub fn rank(m: &ComplexMatrix) -> Result<usize> {
    Ok(column_basis(m)?.ncols())
}

/// Orthogonal projector onto the column span of `m`.
///
/// Rank-deficient inputs are fine; the projector is onto the actual span.
pub fn projector(m: &ComplexMatrix) -> Result<Hermitian> {
    let q = column_basis(m)?;
    Hermitian::new(&q * q.adjoint())
}

/// Hermitian inverse square root `S = A^{-1/2}`, so that `S A Sᴴ = I`.
pub fn hermitian_inv_sqrt(a: &Hermitian) -> Result<ComplexMatrix> {
    let (vals, vecs) = a.eigen();
    check_pd_spectrum(&vals)?;
    let s = spectral_apply(&vals, &vecs, |l| 1.0 / l.sqrt());
    // One refinement step: whiten the residual `S A Sᴴ` again. The residual is
    // well conditioned, so its own inverse root is accurate.
    let w = congruence(&s, a)?;
    let (wv, wq) = w.eigen();
    if wv.first().is_some_and(|&l| l > 0.0) {
        Ok(spectral_apply(&wv, &wq, |l| 1.0 / l.sqrt()) * s)
    } else {
        Ok(s)
    }
}

/// Compensated accumulator for dot products (error-free transformations).
#[derive(Default, Clone, Copy)]
struct Dot2 {
    hi: f64,
    lo: f64,
}

impl Dot2 {
    fn add_prod(&mut self, a: f64, b: f64) {
        let p = a * b;
        let e = a.mul_add(b, -p);
        let s = self.hi + p;
        let bb = s - self.hi;
        let t = (self.hi - (s - bb)) + (p - bb);
        self.hi = s;
        self.lo += t + e;
    }

    fn split(self) -> (f64, f64) {
        let s = self.hi + self.lo;
        (s, self.lo - (s - self.hi))
    }
}

/// `S A Sᴴ` evaluated with compensated dot products.
///
/// Plain products lose about `ε·‖S‖²‖A‖` to cancellation, which swamps the
/// result when `S` whitens an ill-conditioned `A`.
pub fn congruence(s: &ComplexMatrix, a: &Hermitian) -> Result<Hermitian> {
    let n = a.dim();
    if s.ncols() != n {
        return Err(Error::BadShape(format!("{}x{} factor against {n}x{n} matrix", s.nrows(), s.ncols())));
    }
    let k = s.nrows();
    let am = a.as_matrix();
    // T = A Sᴴ kept as an unevaluated sum hi + lo.
    let mut t_hi = ComplexMatrix::zeros(n, k);
    let mut t_lo = ComplexMatrix::zeros(n, k);
    for r in 0..n {
        for c in 0..k {
            let (mut re, mut im) = (Dot2::default(), Dot2::default());
            for l in 0..n {
                let (x, y) = (am[(r, l)], s[(c, l)]);
                re.add_prod(x.re, y.re);
                re.add_prod(x.im, y.im);
                im.add_prod(x.im, y.re);
                im.add_prod(-x.re, y.im);
            }
            let (rh, rl) = re.split();
            let (ih, il) = im.split();
            t_hi[(r, c)] = Complex64::new(rh, ih);
            t_lo[(r, c)] = Complex64::new(rl, il);
        }
    }
    let mut w = ComplexMatrix::zeros(k, k);
    for r in 0..k {
        for c in 0..k {
            let (mut re, mut im) = (Dot2::default(), Dot2::default());
            for l in 0..n {
                let x = s[(r, l)];
                for y in [t_hi[(l, c)], t_lo[(l, c)]] {
                    re.add_prod(x.re, y.re);
                    re.add_prod(-x.im, y.im);
                    im.add_prod(x.re, y.im);
                    im.add_prod(x.im, y.re);
                }
            }
            w[(r, c)] = Complex64::new(re.split().0, im.split().0);
        }
    }
    Hermitian::new(w)
}

/// Hermitian square root `A^{1/2}` of a PSD matrix (negative rounding noise clipped).
pub fn hermitian_sqrt(a: &Hermitian) -> Result<ComplexMatrix> {
    let (vals, vecs) = a.eigen();
    if vals.iter().any(|&l| l < -PSD_TOL) {
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    Ok(spectral_apply(&vals, &vecs, |l| l.max(0.0).sqrt()))
}

/// `log|A|` from the eigenvalues of a Hermitian PSD matrix.
///
/// A singular matrix yields [`Error::SingularMatrix`]; density code maps it to `-∞`.
pub fn logdet_hpd(a: &Hermitian) -> Result<f64> {
    logdet_from_eigenvalues(&a.eigenvalues())
}

pub(crate) fn logdet_from_eigenvalues(vals: &[f64]) -> Result<f64> {
    let max = vals.iter().copied().fold(0.0_f64, f64::max);
    let mut acc = 0.0;
    for &l in vals {
        if l < -PSD_TOL * max.max(1.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: l });
        }
        if l <= 0.0 {
            return Err(Error::SingularMatrix);
        }
        acc += l.ln();
    }
    Ok(acc)
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    pub fn random_pd(rng: &mut impl Rng, dim: usize) -> Hermitian {
        let a = random_matrix(rng, dim + 3, dim);
        Hermitian::gram(&a).unwrap()
    }

    pub fn fro(a: &ComplexMatrix) -> f64 {
        a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Determinant by cofactor expansion along the first row.
    pub fn cofactor_det(a: &ComplexMatrix) -> Complex64 {
        let n = a.nrows();
        if n == 1 {
            return a[(0, 0)];
        }
        let mut det = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let minor = a.clone().remove_row(0).remove_column(j);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            det += a[(0, j)] * cofactor_det(&minor) * sign;
        }
        det
    }
}
