//! Design guidance from the CRB-ratio law, and concentration-ellipse loci.

use serde::{Deserialize, Serialize};

use crate::betalaw::crb_ratio_law;
use crate::cxla::{self, Hermitian};
use crate::{Complex64, ComplexMatrix, Error, Result};

/// Default confidence levels for design curves.
pub const DEFAULT_CONFIDENCES: [f64; 2] = [0.90, 0.99];

/// `P[(Ĵ⁻¹)ᵢᵢ ≤ κ·(J⁻¹)ᵢᵢ]`, the upper tail of `Beta(m − p + 1, n − m)` at `1/κ`.
///
/// Requires `p < m ≤ n − p` and `κ > 0`.
pub fn confidence_at(n: usize, m: usize, p: usize, kappa: f64) -> Result<f64> {
    if p == 0 || m <= p || m + p > n {
        return Err(Error::DomainError(format!("need p < m <= n - p, got n = {n}, m = {m}, p = {p}")));
    }
    if !(kappa > 0.0) {
        return Err(Error::DomainError(format!("inflation factor must be positive, got {kappa}")));
    }
    let x = 1.0 / kappa;
    if x >= 1.0 {
        return Ok(0.0);
    }
    crb_ratio_law(n, m, p)?.sf(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanQuery {
    pub n: usize,
    pub p: usize,
    /// Tolerable CRB inflation factor, `> 1`.
    pub kappa: f64,
    pub confidence: f64,
}

impl PlanQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 1.0) {
            return Err(Error::DomainError(format!("kappa must exceed 1, got {}", self.kappa)));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::DomainError(format!("confidence must lie in (0, 1), got {}", self.confidence)));
        }
        if self.p == 0 || self.n < 2 * self.p + 2 {
            return Err(Error::DomainError(format!(
                "need n >= 2p + 2 for a non-empty search range, got n = {}, p = {}",
                self.n, self.p
            )));
        }
        Ok(())
    }

    /// Smallest and largest admissible `m`.
    pub fn search_range(&self) -> (usize, usize) {
        (self.p + 2, self.n - self.p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub m: usize,
    /// Compression ratio `m/n`.
    pub ratio: f64,
    /// Confidence achieved at `m`.
    pub confidence: f64,
    /// Confidence at `m − 1`, when that is still in the search range.
    pub confidence_below: Option<f64>,
}

/// Smallest `m` in `[p + 2, n − p]` whose confidence reaches the target.
///
/// Bisection relies on `confidence_at` being nondecreasing in `m`.
pub fn min_measurements(q: &PlanQuery) -> Result<Plan> {
    q.validate()?;
    let (mut lo, mut hi) = q.search_range();
    let conf = |m| confidence_at(q.n, m, q.p, q.kappa);
    let best = conf(hi)?;
    if best < q.confidence {
        return Err(Error::Infeasible { max_confidence: best, max_m: hi });
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if conf(mid)? >= q.confidence {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let m = lo;
    let confidence = conf(m)?;
    let confidence_below = if m > q.search_range().0 { Some(conf(m - 1)?) } else { None };
    if confidence < q.confidence || confidence_below.is_some_and(|c| c >= q.confidence) {
        return Err(Error::DomainError(format!("confidence is not monotone in m near m = {m}")));
    }
    Ok(Plan { m, ratio: m as f64 / q.n as f64, confidence, confidence_below })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub kappa: f64,
    pub confidence: f64,
    /// `None` when the target cannot be met with `m ≤ n − p`.
    pub m: Option<usize>,
    pub ratio: Option<f64>,
}

/// Minimum compression ratio over a grid of inflation factors, per confidence level.
///
/// Rows are grouped by confidence, then ordered as `kappas`.
pub fn curve(n: usize, p: usize, kappas: &[f64], confidences: &[f64]) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::with_capacity(kappas.len() * confidences.len());
    for &confidence in confidences {
        for &kappa in kappas {
            let q = PlanQuery { n, p, kappa, confidence };
            let (m, ratio) = match min_measurements(&q) {
                Ok(plan) => (Some(plan.m), Some(plan.ratio)),
                Err(Error::Infeasible { .. }) => (None, None),
                Err(e) => return Err(e),
            };
            rows.push(CurveRow { kappa, confidence, m, ratio });
        }
    }
    Ok(rows)
}

fn real_part_hermitian(j: &Hermitian) -> Result<Hermitian> {
    Hermitian::new(j.real_part().map(|x| Complex64::new(x, 0.0)))
}

/// Points `e` on `eᵀ Re(J) e = r²`, uniformly spaced in polar angle.
pub fn ellipse_locus(j: &Hermitian, r2: f64, points: usize) -> Result<Vec<[f64; 2]>> {
    if j.dim() != 2 {
        return Err(Error::BadShape(format!("ellipse needs a 2x2 FIM, got {0}x{0}", j.dim())));
    }
    if !(r2 > 0.0 && r2.is_finite()) {
        return Err(Error::DomainError(format!("r² must be positive, got {r2}")));
    }
    if points == 0 {
        return Err(Error::DomainError("need at least one point".into()));
    }
    let re = real_part_hermitian(j)?;
    re.check_pd()?;
    let r = re.real_part();
    Ok((0..points)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / points as f64;
            let (s, c) = t.sin_cos();
            let q = r[(0, 0)] * c * c + 2.0 * r[(0, 1)] * c * s + r[(1, 1)] * s * s;
            let scale = (r2 / q).sqrt();
            [c * scale, s * scale]
        })
        .collect())
}

/// `λ_max(Re(J)⁻¹ Re(Ĵ))`. At most one exactly when the `Ĵ` ellipse encloses the `J` one.
pub fn enclosure_ratio(j: &Hermitian, j_hat: &Hermitian) -> Result<f64> {
    if j.dim() != j_hat.dim() {
        return Err(Error::BadShape(format!("FIM dimensions differ: {} vs {}", j.dim(), j_hat.dim())));
    }
    let s: ComplexMatrix = cxla::hermitian_inv_sqrt(&real_part_hermitian(j)?)?;
    let w = cxla::congruence(&s, &real_part_hermitian(j_hat)?)?;
    Ok(*w.eigenvalues().last().expect("non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::betalaw::BetaLaw;

    #[test]
    fn confidence_limits() {
        assert_eq!(confidence_at(128, 64, 2, 1.0).unwrap(), 0.0);
        assert_eq!(confidence_at(128, 64, 2, 0.5).unwrap(), 0.0);
        assert!(confidence_at(128, 64, 2, 1e9).unwrap() > 1.0 - 1e-12);
        let law = BetaLaw::new(63.0, 64.0).unwrap();
        assert_eq!(confidence_at(128, 64, 2, 2.5).unwrap(), 1.0 - law.cdf(0.4).unwrap());
        assert!(confidence_at(128, 2, 2, 2.0).is_err());
        assert!(confidence_at(128, 127, 2, 2.0).is_err());
        assert!(confidence_at(128, 64, 2, 0.0).is_err());
    }

    #[test]
    fn confidence_is_monotone() {
        let (n, p) = (64, 3);
        let kappas: Vec<f64> = (0..=60).map(|k| 1.01 + k as f64 * (10.0 - 1.01) / 60.0).collect();
        for m in p + 1..=n - p {
            let row: Vec<f64> = kappas.iter().map(|&k| confidence_at(n, m, p, k).unwrap()).collect();
            assert!(row.windows(2).all(|w| w[1] >= w[0]), "m = {m}");
            if m < n - p {
                for &k in &kappas {
                    assert!(confidence_at(n, m + 1, p, k).unwrap() >= confidence_at(n, m, p, k).unwrap());
                }
            }
        }
    }

    #[test]
    fn plan_boundary() {
        let q = PlanQuery { n: 128, p: 2, kappa: 2.0, confidence: 0.9 };
        let plan = min_measurements(&q).unwrap();
        assert!(plan.confidence >= 0.9);
        assert!(plan.confidence_below.unwrap() < 0.9);
        assert_eq!(plan.ratio, plan.m as f64 / 128.0);
        // Brute-force oracle.
        let brute = (4..=126).find(|&m| confidence_at(128, m, 2, 2.0).unwrap() >= 0.9).unwrap();
        assert_eq!(plan.m, brute);
    }

    #[test]
    fn plan_huge_kappa() {
        let plan = min_measurements(&PlanQuery { n: 128, p: 2, kappa: 1e6, confidence: 0.5 }).unwrap();
        assert_eq!(plan.m, 4);
        assert!(plan.confidence_below.is_none());
    }

    #[test]
    fn plan_infeasible() {
        match min_measurements(&PlanQuery { n: 16, p: 2, kappa: 1.01, confidence: 0.99 }) {
            Err(Error::Infeasible { max_confidence, max_m }) => {
                assert_eq!(max_m, 14);
                assert_eq!(max_confidence, confidence_at(16, 14, 2, 1.01).unwrap());
            }
            other => panic!("{other:?}"),
        }
        assert!(min_measurements(&PlanQuery { n: 5, p: 2, kappa: 2.0, confidence: 0.5 }).is_err());
        assert!(min_measurements(&PlanQuery { n: 50, p: 2, kappa: 1.0, confidence: 0.5 }).is_err());
        assert!(min_measurements(&PlanQuery { n: 50, p: 2, kappa: 2.0, confidence: 1.0 }).is_err());
    }

    #[test]
    fn curve_monotonicity() {
        let kappas: Vec<f64> = (0..40).map(|k| 1.1 + 0.1 * k as f64).collect();
        let rows = curve(128, 2, &kappas, &DEFAULT_CONFIDENCES).unwrap();
        assert_eq!(rows.len(), 80);
        let (lo, hi) = rows.split_at(40);
        let ratio = |r: &CurveRow| r.ratio.unwrap_or(f64::INFINITY);
        for w in lo.windows(2).chain(hi.windows(2)) {
            assert!(ratio(&w[1]) <= ratio(&w[0]));
        }
        for (a, b) in lo.iter().zip(hi) {
            assert!(ratio(b) >= ratio(a));
        }
        assert!(rows.iter().any(|r| r.m.is_some()));
    }

    #[test]
    fn ellipse_circle_and_axes() {
        let pts = ellipse_locus(&Hermitian::identity(2), 1.0, 64).unwrap();
        assert!(pts.iter().all(|e| (e[0].hypot(e[1]) - 1.0).abs() < 1e-15));
        let pts = ellipse_locus(&Hermitian::from_real_diagonal(&[4.0, 1.0]), 1.0, 4).unwrap();
        assert!((pts[0][0] - 0.5).abs() < 1e-15 && pts[0][1] == 0.0);
        assert!((pts[1][1] - 1.0).abs() < 1e-15);
        assert!(ellipse_locus(&Hermitian::from_real_diagonal(&[1.0, -1.0]), 1.0, 8).is_err());
        assert!(ellipse_locus(&Hermitian::identity(3), 1.0, 8).is_err());
    }

    #[test]
    fn ellipse_residual() {
        let j = Hermitian::new(ComplexMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(3.0, 0.0), Complex64::new(1.2, 0.7), Complex64::new(1.2, -0.7), Complex64::new(2.0, 0.0)],
        ))
        .unwrap();
        let r = j.real_part();
        for e in ellipse_locus(&j, 3.0, 360).unwrap() {
            let q = r[(0, 0)] * e[0] * e[0] + 2.0 * r[(0, 1)] * e[0] * e[1] + r[(1, 1)] * e[1] * e[1];
            assert!((q - 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn enclosure_of_scaled_fim() {
        let j = Hermitian::from_real_diagonal(&[4.0, 1.0]);
        assert!((enclosure_ratio(&j, &j.scale(0.5)).unwrap() - 0.5).abs() < 1e-15);
        let bigger = Hermitian::from_real_diagonal(&[4.0, 2.0]);
        assert!((enclosure_ratio(&j, &bigger).unwrap() - 2.0).abs() < 1e-14);
    }
}
