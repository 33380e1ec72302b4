//! Fisher information, Cramér–Rao bounds and KL-divergence quadratic forms,
//! before and after compression.
//!
//! For `y ~ CN(x(θ), σ²I)` with Jacobian `G`, `J = GᴴG/σ²`. Compressing to
//! `Φy` gives `Ĵ = Ĝᴴ Ĝ / σ²` with `Ĝ = P_{Φᴴ} G`, where `P_{Φᴴ}` projects onto
//! the row span of `Φ`.

use nalgebra::Cholesky;

use crate::cxla::{self, Hermitian, ThinQr, PSD_TOL};
use crate::{ComplexMatrix, ComplexVector, Error, Result};

/// `gᵢᴴ(I − P)gᵢ < SINGULAR_FIM_TOL · ‖gᵢ‖²` means parameter `i` is unidentifiable.
pub const SINGULAR_FIM_TOL: f64 = 1e-12;

/// A Fisher information matrix together with the Jacobian it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct FimResult {
    j: Hermitian,
    g: ComplexMatrix,
    sigma2: f64,
}

impl FimResult {
    pub fn matrix(&self) -> &Hermitian {
        &self.j
    }

    /// The Jacobian `G`, or for a compressed FIM its row-space coordinates `QᴴG`.
    pub fn jacobian(&self) -> &ComplexMatrix {
        &self.g
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn p(&self) -> usize {
        self.g.ncols()
    }

    /// Per-parameter CRBs `(J⁻¹)ᵢᵢ`, projection form.
    pub fn crbs(&self) -> Result<Vec<f64>> {
        (0..self.p()).map(|i| crb(self, i)).collect()
    }
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::DomainError(format!("noise variance must be positive, got {sigma2}")))
    }
}

fn check_jacobian(g: &ComplexMatrix) -> Result<()> {
    if g.ncols() == 0 || g.nrows() <= g.ncols() {
        return Err(Error::BadShape(format!(
            "Jacobian must be n x p with n > p >= 1, got {}x{}",
            g.nrows(),
            g.ncols()
        )));
    }
    cxla::ensure_finite(g)
}

fn check_index(p: usize, i: usize) -> Result<()> {
    if i < p {
        Ok(())
    } else {
        Err(Error::DomainError(format!("parameter index {i} out of range for p = {p}")))
    }
}

/// `J = GᴴG / σ²`.
pub fn fim(g: &ComplexMatrix, sigma2: f64) -> Result<FimResult> {
    check_sigma2(sigma2)?;
    check_jacobian(g)?;
    let j = Hermitian::gram(g)?.scale(1.0 / sigma2);
    Ok(FimResult { j, g: g.clone(), sigma2 })
}

/// `‖gᵢ‖²` and the projection `P_{G_i} gᵢ` onto the other columns.
fn split_column(g: &ComplexMatrix, i: usize) -> Result<(ComplexVector, ComplexVector)> {
    let gi: ComplexVector = g.column(i).into_owned();
    if g.ncols() == 1 {
        return Ok((ComplexVector::zeros(gi.len()), gi));
    }
    let others = g.clone().remove_column(i);
    let q = cxla::column_basis(&others)?;
    let proj = &q * (q.adjoint() * &gi);
    Ok((proj, gi))
}

/// CRB for parameter `i`: `σ² (gᵢᴴ(I − P_{G_i})gᵢ)⁻¹`.
pub fn crb(fim: &FimResult, i: usize) -> Result<f64> {
    crb_projection_form(&fim.g, fim.sigma2, i)
}

fn crb_projection_form(g: &ComplexMatrix, sigma2: f64, i: usize) -> Result<f64> {
    check_index(g.ncols(), i)?;
    let (proj, gi) = split_column(g, i)?;
    let norm2 = gi.norm_squared();
    let resid = (&gi - proj).norm_squared();
    if !(norm2 > 0.0) || resid < SINGULAR_FIM_TOL * norm2 {
        return Err(Error::SingularFim { index: i });
    }
    Ok(sigma2 / resid)
}

/// CRB for parameter `i` in principal-angle form `σ² / (‖gᵢ‖² sin²ψᵢ)`.
pub fn crb_angle_form(g: &ComplexMatrix, sigma2: f64, i: usize) -> Result<f64> {
    check_sigma2(sigma2)?;
    check_jacobian(g)?;
    check_index(g.ncols(), i)?;
    let (proj, gi) = split_column(g, i)?;
    let norm2 = gi.norm_squared();
    if !(norm2 > 0.0) {
        return Err(Error::SingularFim { index: i });
    }
    let cos2 = proj.norm_squared() / norm2;
    let sin2 = 1.0 - cos2;
    if sin2 < SINGULAR_FIM_TOL {
        return Err(Error::SingularFim { index: i });
    }
    Ok(sigma2 / (norm2 * sin2))
}

/// Principal angle between `span(gᵢ)` and the span of the other columns, in `[0, π/2]`.
pub fn principal_angle(g: &ComplexMatrix, i: usize) -> Result<f64> {
    check_jacobian(g)?;
    check_index(g.ncols(), i)?;
    let (proj, gi) = split_column(g, i)?;
    let cos = (proj.norm_squared() / gi.norm_squared()).sqrt().min(1.0);
    Ok(cos.acos())
}

/// `(A⁻¹)ᵢᵢ` by direct inversion of a positive definite matrix.
pub fn inverse_diagonal(a: &Hermitian, i: usize) -> Result<f64> {
    check_index(a.dim(), i)?;
    Ok(a.inverse()?.as_matrix()[(i, i)].re)
}

/// Orthonormal basis of the row span of a compressor `Φ`.
///
/// Compute once per draw and reuse across statistics.
#[derive(Debug, Clone)]
pub struct RowSpace {
    qr: ThinQr,
}

impl RowSpace {
    /// Fails with [`Error::RankDeficient`] if `Φ` has row rank below its row count.
    pub fn new(phi: &ComplexMatrix) -> Result<Self> {
        Ok(RowSpace { qr: ThinQr::new(&phi.adjoint())? })
    }

    /// Compressed dimension `m`.
    pub fn rank(&self) -> usize {
        self.qr.rank()
    }

    pub fn ambient_dim(&self) -> usize {
        self.qr.rows()
    }

    /// Orthonormal basis `Q` (`n × m`), `P_{Φᴴ} = QQᴴ`.
    pub fn basis(&self) -> ComplexMatrix {
        self.qr.q()
    }

    pub fn projector(&self) -> Result<Hermitian> {
        let q = self.basis();
        Hermitian::new(&q * q.adjoint())
    }

    /// `Ĵ = Gᴴ P_{Φᴴ} G / σ²`.
    ///
    /// The stored Jacobian is `QᴴG` (`m × p`), an isometric image of
    /// `P_{Φᴴ} G`, so CRBs computed from it are those of `Ĵ`.
    pub fn compress_fim(&self, g: &ComplexMatrix, sigma2: f64) -> Result<FimResult> {
        check_sigma2(sigma2)?;
        check_jacobian(g)?;
        if g.nrows() != self.ambient_dim() {
            return Err(Error::BadShape(format!(
                "Jacobian has {} rows, compressor acts on dimension {}",
                g.nrows(),
                self.ambient_dim()
            )));
        }
        if g.ncols() >= self.rank() {
            return Err(Error::BadShape(format!(
                "need p < m, got p = {} and m = {}",
                g.ncols(),
                self.rank()
            )));
        }
        let coords = self.qr.coords(g)?;
        let j = Hermitian::gram(&coords)?.scale(1.0 / sigma2);
        Ok(FimResult { j, g: coords, sigma2 })
    }

    /// `vᴴ P_{Φᴴ} v`.
    pub fn projected_energy(&self, v: &ComplexVector) -> Result<f64> {
        if v.len() != self.ambient_dim() {
            return Err(Error::BadShape(format!(
                "vector of length {} for ambient dimension {}",
                v.len(),
                self.ambient_dim()
            )));
        }
        let col = ComplexMatrix::from_column_slice(v.len(), 1, v.as_slice());
        Ok(self.qr.coords(&col)?.norm_squared())
    }
}

fn check_compressor(g: &ComplexMatrix, phi: &ComplexMatrix) -> Result<()> {
    if phi.ncols() != g.nrows() || phi.nrows() > phi.ncols() {
        return Err(Error::BadShape(format!(
            "compressor must be m x n with m <= n = {}, got {}x{}",
            g.nrows(),
            phi.nrows(),
            phi.ncols()
        )));
    }
    Ok(())
}

/// FIM after compression by `Φ` (`m × n`, full row rank, `p < m ≤ n`).
pub fn compressed_fim(g: &ComplexMatrix, phi: &ComplexMatrix, sigma2: f64) -> Result<FimResult> {
    check_jacobian(g)?;
    check_compressor(g, phi)?;
    RowSpace::new(phi)?.compress_fim(g, sigma2)
}

/// CRB for parameter `i` after compression, projection form on `Ĝ`.
pub fn compressed_crb(g: &ComplexMatrix, phi: &ComplexMatrix, sigma2: f64, i: usize) -> Result<f64> {
    crb(&compressed_fim(g, phi, sigma2)?, i)
}

/// Normalized FIM `W = J^{-1/2} Ĵ J^{-H/2}` and its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFim {
    w: Hermitian,
    eigenvalues: Vec<f64>,
}

impl NormalizedFim {
    pub fn matrix(&self) -> &Hermitian {
        &self.w
    }

    /// Ascending eigenvalues, all in `[0, 1]` up to [`PSD_TOL`].
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

/// `W = S Ĵ Sᴴ` with `S = J^{-1/2}`. Rejects a spectrum outside `[0, 1]`.
pub fn normalized_fim(full: &FimResult, compressed: &FimResult) -> Result<NormalizedFim> {
    normalize_matrix(&full.j, &compressed.j)
}

pub(crate) fn normalize_matrix(j: &Hermitian, j_hat: &Hermitian) -> Result<NormalizedFim> {
    if j.dim() != j_hat.dim() {
        return Err(Error::BadShape(format!(
            "FIM dimensions differ: {} vs {}",
            j.dim(),
            j_hat.dim()
        )));
    }
    let s = cxla::hermitian_inv_sqrt(j)?;
    normalize_with(&s, j_hat)
}

pub(crate) fn normalize_with(s: &ComplexMatrix, j_hat: &Hermitian) -> Result<NormalizedFim> {
    let w = cxla::congruence(s, j_hat)?;
    let eigenvalues = w.eigenvalues();
    let lo = eigenvalues[0];
    let hi = eigenvalues[eigenvalues.len() - 1];
    if lo < -PSD_TOL || hi > 1.0 + PSD_TOL {
        return Err(Error::DomainError(format!(
            "normalized FIM spectrum [{lo}, {hi}] leaves [0, 1]; Ĵ is not dominated by J"
        )));
    }
    Ok(NormalizedFim { w, eigenvalues })
}

fn difference(x1: &ComplexVector, x2: &ComplexVector) -> Result<ComplexVector> {
    if x1.len() != x2.len() {
        return Err(Error::BadShape(format!("vector lengths differ: {} vs {}", x1.len(), x2.len())));
    }
    Ok(x1 - x2)
}

/// `‖L⁻¹v‖²` for `A = LLᴴ`, i.e. `vᴴA⁻¹v`.
fn inverse_quadratic_form(a: &Hermitian, v: &ComplexVector) -> Result<f64> {
    if v.len() != a.dim() {
        return Err(Error::BadShape(format!(
            "vector of length {} against {}x{} covariance",
            v.len(),
            a.dim(),
            a.dim()
        )));
    }
    a.check_pd()?;
    let chol = Cholesky::new(a.as_matrix().clone()).ok_or_else(|| Error::NotPositiveDefinite {
        min_eigenvalue: a.eigenvalues()[0],
    })?;
    let y = chol
        .l_dirty()
        .solve_lower_triangular(v)
        .ok_or(Error::SingularMatrix)?;
    Ok(y.norm_squared())
}

/// KL divergence between `CN(x1, C)` and `CN(x2, C)`: `Δᴴ C⁻¹ Δ`.
pub fn kl_divergence(x1: &ComplexVector, x2: &ComplexVector, c: &Hermitian) -> Result<f64> {
    let delta = difference(x1, x2)?;
    inverse_quadratic_form(c, &delta)
}

/// KL divergence after compression: `Δᴴ Φᴴ (Φ C Φᴴ)⁻¹ Φ Δ`.
pub fn compressed_kl(x1: &ComplexVector, x2: &ComplexVector, c: &Hermitian, phi: &ComplexMatrix) -> Result<f64> {
    let delta = difference(x1, x2)?;
    if phi.ncols() != delta.len() || phi.nrows() > phi.ncols() {
        return Err(Error::BadShape(format!(
            "compressor must be m x n with m <= n = {}, got {}x{}",
            delta.len(),
            phi.nrows(),
            phi.ncols()
        )));
    }
    if c.dim() != delta.len() {
        return Err(Error::BadShape(format!("covariance is {}x{}, vectors have length {}", c.dim(), c.dim(), delta.len())));
    }
    cxla::orthonormal_columns(&phi.adjoint())?;
    let compressed_cov = Hermitian::new(phi * c.as_matrix() * phi.adjoint())?;
    inverse_quadratic_form(&compressed_cov, &(phi * delta))
}

/// Compressed KL divergence for white noise `C = σ²I`: `Δᴴ P_{Φᴴ} Δ / σ²`.
pub fn compressed_kl_white(x1: &ComplexVector, x2: &ComplexVector, sigma2: f64, row_space: &RowSpace) -> Result<f64> {
    check_sigma2(sigma2)?;
    let delta = difference(x1, x2)?;
    Ok(row_space.projected_energy(&delta)? / sigma2)
}

/// Scalar covariance `σ²I` as a [`Hermitian`].
pub fn white_covariance(n: usize, sigma2: f64) -> Hermitian {
    Hermitian::identity(n).scale(sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use crate::cxla::testutil::*;
    use crate::sigmodel::{ula_jacobian, Source, UlaScenario};
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn coordinate_compressor(m: usize, n: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(m, n, |i, j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) })
    }

    #[test]
    fn fim_unit_column() {
        let g = ComplexMatrix::from_column_slice(2, 1, &[c(0.6, 0.0), c(0.0, 0.8)]);
        let f = fim(&g, 1.0).unwrap();
        assert!((f.matrix().as_matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fim_scales_inversely_with_noise() {
        let mut r = rng(20);
        let g = random_matrix(&mut r, 6, 2);
        let a = fim(&g, 1.0).unwrap();
        let b = fim(&g, 2.0).unwrap();
        assert!(fro(&(a.matrix().as_matrix() * c(0.5, 0.0) - b.matrix().as_matrix())) < 1e-14);
    }

    #[test]
    fn fim_single_source_ula() {
        let s = UlaScenario::new(3, vec![Source::new(0.0, 1.0, 0.0)]).unwrap();
        let f = fim(&ula_jacobian(&s), 1.0).unwrap();
        assert!((f.matrix().as_matrix()[(0, 0)].re - 5.0).abs() < 1e-14);
    }

    #[test]
    fn fim_rejects_bad_input() {
        let mut r = rng(21);
        assert!(matches!(fim(&random_matrix(&mut r, 2, 2), 1.0), Err(Error::BadShape(_))));
        assert!(matches!(fim(&random_matrix(&mut r, 4, 2), 0.0), Err(Error::DomainError(_))));
    }

    #[test]
    fn fim_reconstructible_from_stored_jacobian() {
        let mut r = rng(22);
        let g = random_matrix(&mut r, 9, 3);
        let f = fim(&g, 0.7).unwrap();
        let again = f.jacobian().adjoint() * f.jacobian() / c(0.7, 0.0);
        assert!(fro(&(again - f.matrix().as_matrix())) < 1e-12 * fro(f.matrix().as_matrix()));
    }

    #[test]
    fn crb_orthogonal_columns() {
        let g = coordinate_compressor(3, 5).transpose();
        let f = fim(&g, 1.0).unwrap();
        for i in 0..3 {
            assert!((crb(&f, i).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn crb_single_parameter() {
        let g = ComplexMatrix::from_column_slice(3, 1, &[c(1.0, 1.0), c(2.0, 0.0), c(0.0, -1.0)]);
        let f = fim(&g, 0.3).unwrap();
        assert!((crb(&f, 0).unwrap() - 0.3 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn crb_matches_direct_inverse() {
        let mut r = rng(23);
        let g = random_matrix(&mut r, 8, 3);
        let f = fim(&g, 1.3).unwrap();
        let inv = f.matrix().as_matrix().clone().try_inverse().unwrap();
        for i in 0..3 {
            let want = inv[(i, i)].re;
            assert!((crb(&f, i).unwrap() - want).abs() < 1e-10 * want);
        }
    }

    #[test]
    fn crb_angle_form_cases() {
        let g = coordinate_compressor(2, 4).transpose();
        assert!((crb_angle_form(&g, 2.0, 1).unwrap() - 2.0).abs() < 1e-15);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let g = ComplexMatrix::from_column_slice(3, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0), c(h, 0.0), c(0.0, 0.0)]);
        assert!((crb_angle_form(&g, 1.0, 0).unwrap() - 2.0).abs() < 1e-12);
        assert!((principal_angle(&g, 0).unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn crb_forms_agree_on_random_instances() {
        let mut r = rng(24);
        for _ in 0..20 {
            let n = r.random_range(4..40);
            let p = r.random_range(1..4);
            let g = random_matrix(&mut r, n, p);
            let sigma2 = r.random_range(0.1..3.0);
            let f = fim(&g, sigma2).unwrap();
            for i in 0..p {
                let a = crb(&f, i).unwrap();
                let b = crb_angle_form(&g, sigma2, i).unwrap();
                let d = inverse_diagonal(f.matrix(), i).unwrap();
                assert!((a - b).abs() < 1e-10 * a);
                assert!((a - d).abs() < 1e-10 * a);
            }
        }
    }

    #[test]
    fn crb_singular_when_column_is_redundant() {
        let mut r = rng(25);
        let a = random_matrix(&mut r, 6, 1);
        let mut g = ComplexMatrix::zeros(6, 2);
        g.set_column(0, &a.column(0));
        g.set_column(1, &(a.column(0) * c(2.0, -1.0)));
        let f = fim(&g, 1.0).unwrap();
        assert_eq!(crb(&f, 0), Err(Error::SingularFim { index: 0 }));
        assert_eq!(crb_angle_form(&g, 1.0, 1), Err(Error::SingularFim { index: 1 }));
    }

    #[test]
    fn compression_by_invertible_square_matrix_is_lossless() {
        let mut r = rng(26);
        let g = random_matrix(&mut r, 6, 2);
        let phi = random_matrix(&mut r, 6, 6);
        let j = fim(&g, 1.0).unwrap();
        let jh = compressed_fim(&g, &phi, 1.0).unwrap();
        assert!(fro(&(j.matrix().as_matrix() - jh.matrix().as_matrix())) < 1e-10 * fro(j.matrix().as_matrix()));
        for i in 0..2 {
            let a = crb(&j, i).unwrap();
            let b = compressed_crb(&g, &phi, 1.0, i).unwrap();
            assert!((a - b).abs() < 1e-9 * a);
        }
    }

    #[test]
    fn coordinate_compressor_truncates_model() {
        let mut r = rng(27);
        let g = random_matrix(&mut r, 8, 2);
        let jh = compressed_fim(&g, &coordinate_compressor(5, 8), 1.5).unwrap();
        let truncated = fim(&g.rows(0, 5).into_owned(), 1.5).unwrap();
        assert!(fro(&(jh.matrix().as_matrix() - truncated.matrix().as_matrix())) < 1e-12);
    }

    #[test]
    fn compressed_fim_invariant_to_row_mixing() {
        let mut r = rng(28);
        let g = random_matrix(&mut r, 10, 2);
        let phi = random_matrix(&mut r, 5, 10);
        let t = random_matrix(&mut r, 5, 5);
        let a = compressed_fim(&g, &phi, 1.0).unwrap();
        let b = compressed_fim(&g, &(&t * &phi), 1.0).unwrap();
        assert!(fro(&(a.matrix().as_matrix() - b.matrix().as_matrix())) < 1e-10 * fro(a.matrix().as_matrix()));
    }

    #[test]
    fn compressed_fim_rejects_rank_deficient_compressor() {
        let mut r = rng(29);
        let g = random_matrix(&mut r, 8, 2);
        let mut phi = random_matrix(&mut r, 4, 8);
        let row = phi.row(0).into_owned();
        phi.set_row(3, &row);
        assert!(matches!(compressed_fim(&g, &phi, 1.0), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn compressed_fim_requires_p_below_m() {
        let mut r = rng(30);
        let g = random_matrix(&mut r, 8, 3);
        let phi = random_matrix(&mut r, 3, 8);
        assert!(matches!(compressed_fim(&g, &phi, 1.0), Err(Error::BadShape(_))));
    }

    #[test]
    fn compressed_fim_equals_explicit_row_space_formula() {
        let mut r = rng(31);
        let g = random_matrix(&mut r, 12, 3);
        let phi = random_matrix(&mut r, 6, 12);
        let p = phi.adjoint() * (&phi * phi.adjoint()).try_inverse().unwrap() * &phi;
        let explicit = g.adjoint() * p * &g;
        let jh = compressed_fim(&g, &phi, 1.0).unwrap();
        assert!(fro(&(explicit - jh.matrix().as_matrix())) < 1e-10 * fro(jh.matrix().as_matrix()));
    }

    #[test]
    fn normalized_fim_cases() {
        let mut r = rng(32);
        let g = random_matrix(&mut r, 7, 2);
        let j = fim(&g, 1.0).unwrap();
        let w = normalized_fim(&j, &j).unwrap();
        assert!(fro(&(w.matrix().as_matrix() - ComplexMatrix::identity(2, 2))) < 1e-12);
        let half = fim(&(&g * c(std::f64::consts::FRAC_1_SQRT_2, 0.0)), 1.0).unwrap();
        let w = normalized_fim(&j, &half).unwrap();
        assert!(fro(&(w.matrix().as_matrix() - ComplexMatrix::identity(2, 2) * c(0.5, 0.0))) < 1e-12);
        let double = fim(&g, 0.5).unwrap();
        assert!(matches!(normalized_fim(&j, &double), Err(Error::DomainError(_))));
    }

    #[test]
    fn normalized_fim_spectrum_for_sampled_compressors() {
        let mut r = rng(33);
        let g = random_matrix(&mut r, 20, 3);
        let j = fim(&g, 1.0).unwrap();
        for _ in 0..50 {
            let phi = random_matrix(&mut r, 8, 20);
            let jh = compressed_fim(&g, &phi, 1.0).unwrap();
            let w = normalized_fim(&j, &jh).unwrap();
            assert!(w.eigenvalues().iter().all(|&l| (-1e-10..=1.0 + 1e-10).contains(&l)));
            assert!(w.matrix().as_matrix().trace().re <= 3.0 + 1e-10);
            // J − Ĵ is PSD and compressed CRBs dominate.
            assert!(j.matrix().sub(jh.matrix()).unwrap().is_psd(1e-10 * fro(j.matrix().as_matrix())));
            for i in 0..3 {
                assert!(crb(&jh, i).unwrap() >= crb(&j, i).unwrap() - 1e-10);
            }
        }
    }

    #[test]
    fn kl_cases() {
        let mut r = rng(34);
        let x1 = random_matrix(&mut r, 5, 1).column(0).into_owned();
        let x2 = random_matrix(&mut r, 5, 1).column(0).into_owned();
        let cov = white_covariance(5, 2.0);
        assert_eq!(kl_divergence(&x1, &x1, &cov).unwrap(), 0.0);
        let want = (&x1 - &x2).norm_squared() / 2.0;
        assert!((kl_divergence(&x1, &x2, &cov).unwrap() - want).abs() < 1e-14 * want);

        let general = random_pd(&mut r, 5);
        let delta = &x1 - &x2;
        let solve = general.as_matrix().clone().lu().solve(&delta).unwrap();
        let want = delta.dotc(&solve).re;
        assert!((kl_divergence(&x1, &x2, &general).unwrap() - want).abs() < 1e-10 * want);
        assert!(matches!(
            kl_divergence(&x1, &x2, &Hermitian::from_real_diagonal(&[1.0, 1.0, 1.0, 1.0, -1.0])),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn compressed_kl_cases() {
        let mut r = rng(35);
        let n = 10;
        let x1 = random_matrix(&mut r, n, 1).column(0).into_owned();
        let x2 = random_matrix(&mut r, n, 1).column(0).into_owned();
        let general = random_pd(&mut r, n);
        let square = random_matrix(&mut r, n, n);
        let d = kl_divergence(&x1, &x2, &general).unwrap();
        let dh = compressed_kl(&x1, &x2, &general, &square).unwrap();
        assert!((d - dh).abs() < 1e-9 * d);

        let cov = white_covariance(n, 0.5);
        let d = kl_divergence(&x1, &x2, &cov).unwrap();
        for _ in 0..20 {
            let phi = random_matrix(&mut r, 4, n);
            let dh = compressed_kl(&x1, &x2, &cov, &phi).unwrap();
            let ratio = dh / d;
            assert!((0.0..=1.0 + 1e-12).contains(&ratio));
            let fast = compressed_kl_white(&x1, &x2, 0.5, &RowSpace::new(&phi).unwrap()).unwrap();
            assert!((fast - dh).abs() < 1e-10 * dh.max(1e-300));
        }
    }

    fn arb_complex(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
        proptest::collection::vec(-1.0f64..1.0, 2 * rows * cols)
            .prop_map(move |v| ComplexMatrix::from_fn(rows, cols, |i, j| c(v[2 * (i * cols + j)], v[2 * (i * cols + j) + 1])))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn crb_forms_agree(g in arb_complex(16, 4), sigma2 in 0.1f64..10.0) {
            let f = fim(&g, sigma2).unwrap();
            prop_assume!(f.matrix().check_pd().is_ok());
            let s = g.clone().svd(false, false).singular_values;
            prop_assume!(s.min() > 1e-3 * s.max());
            for i in 0..4 {
                let a = crb(&f, i).unwrap();
                let b = crb_angle_form(&g, sigma2, i).unwrap();
                let d = inverse_diagonal(f.matrix(), i).unwrap();
                prop_assert!((a - b).abs() < 1e-9 * a);
                prop_assert!((a - d).abs() < 1e-9 * a);
            }
        }

        #[test]
        fn compression_never_lowers_crb(g in arb_complex(12, 2), phi in arb_complex(5, 12)) {
            let s = g.clone().svd(false, false).singular_values;
            prop_assume!(s.min() > 1e-3 * s.max());
            let f = fim(&g, 1.0).unwrap();
            if let Ok(jh) = compressed_fim(&g, &phi, 1.0) {
                for i in 0..2 {
                    if let Ok(b) = crb(&jh, i) {
                        prop_assert!(b >= crb(&f, i).unwrap() - 1e-10);
                    }
                }
            }
        }
    }
}
