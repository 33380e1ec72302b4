//! Analytical laws of the compressed Fisher information.
//!
//! With `n` ambient dimensions, `m` measurements and `p` parameters:
//!
//! - `W = J^{-1/2} Ĵ J^{-H/2} ~ CB_p(m, n − m)`, density
//!   `c₅ |W|^{m−p} |I − W|^{n−m−p}` on `0 ⪯ W ⪯ I`, with
//!   `c₅ = Γ̃_p(n) / (Γ̃_p(m) Γ̃_p(n − m))`;
//! - `(J⁻¹)ᵢᵢ / (Ĵ⁻¹)ᵢᵢ ~ Beta(m − p + 1, n − m)`;
//! - `D̂ / D ~ Beta(m, n − m)` for white noise.
//!
//! Everything is evaluated in the log domain; `Γ̃_p(128)` alone overflows `f64`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cxla::{Hermitian, PSD_TOL};
use crate::{fisher, Error, Result};

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)] // published table, kept verbatim
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, `g = 7`), `ln |Γ(x)|` via reflection below 1/2.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x)Γ(1 − x) = π / sin(πx)
        return (PI / (PI * x).sin().abs()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln Γ̃_p(a) = (p(p−1)/2) ln π + Σ_{i=1}^{p} ln Γ(a − i + 1)`, for `a > p − 1`.
pub fn ln_cmv_gamma(p: usize, a: f64) -> Result<f64> {
    if p == 0 {
        return Err(Error::DomainError("dimension p must be at least 1".into()));
    }
    if !(a > (p - 1) as f64) {
        return Err(Error::DomainError(format!("complex multivariate gamma needs a > p - 1, got a = {a}, p = {p}")));
    }
    let pf = p as f64;
    let mut acc = 0.5 * pf * (pf - 1.0) * PI.ln();
    for i in 1..=p {
        acc += ln_gamma(a - i as f64 + 1.0);
    }
    Ok(acc)
}

/// Iteration cap of the incomplete-beta continued fraction.
pub const CF_MAX_ITER: usize = 200;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            return Ok(h);
        }
    }
    Err(Error::NoConvergence { iterations: CF_MAX_ITER })
}

/// Univariate Type-I beta law with shapes `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaLaw {
    a: f64,
    b: f64,
}

impl BetaLaw {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::DomainError(format!("beta shapes must be positive, got ({a}, {b})")));
        }
        Ok(BetaLaw { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    fn check_x(x: f64) -> Result<()> {
        if (0.0..=1.0).contains(&x) {
            Ok(())
        } else {
            Err(Error::DomainError(format!("x = {x} is outside [0, 1]")))
        }
    }

    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        Self::check_x(x)?;
        let (a, b) = (self.a, self.b);
        let term = |e: f64, ln_v: f64| if e == 0.0 { 0.0 } else { e * ln_v };
        Ok(term(a - 1.0, x.ln()) + term(b - 1.0, (-x).ln_1p()) - ln_beta(a, b))
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        Ok(self.ln_pdf(x)?.exp())
    }

    /// Regularized incomplete beta `I_x(a, b)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        Self::check_x(x)?;
        self.tail(x, false)
    }

    /// Upper tail `1 − I_x(a, b)`, computed without cancellation.
    pub fn sf(&self, x: f64) -> Result<f64> {
        Self::check_x(x)?;
        self.tail(x, true)
    }

    fn tail(&self, x: f64, upper: bool) -> Result<f64> {
        if x == 0.0 {
            return Ok(if upper { 1.0 } else { 0.0 });
        }
        if x == 1.0 {
            return Ok(if upper { 0.0 } else { 1.0 });
        }
        let (a, b) = (self.a, self.b);
        let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
        // Direct fraction below the switch point, symmetric relation above it.
        let (direct, value) = if x < (a + 1.0) / (a + b + 2.0) {
            (true, ln_front.exp() * beta_cf(a, b, x)? / a)
        } else {
            (false, ln_front.exp() * beta_cf(b, a, 1.0 - x)? / b)
        };
        // `value` is the lower tail when direct, the upper tail otherwise.
        Ok(match (direct, upper) {
            (true, false) | (false, true) => value,
            _ => 1.0 - value,
        })
    }

    /// Inverse cdf by bracketed Newton iteration.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::DomainError(format!("probability {q} is outside [0, 1]")));
        }
        if q == 0.0 {
            return Ok(0.0);
        }
        if q == 1.0 {
            return Ok(1.0);
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut x = self.mean();
        for _ in 0..400 {
            let f = self.cdf(x)? - q;
            if f == 0.0 {
                return Ok(x);
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if f64::from_bits(lo.to_bits() + 1) >= hi {
                break;
            }
            let density = self.pdf(x)?;
            let newton = x - f / density;
            if density > 0.0 && newton > lo && newton < hi {
                let converged = (newton - x).abs() <= 2.0 * f64::EPSILON * x;
                x = newton;
                if converged {
                    break;
                }
            } else {
                x = 0.5 * (lo + hi);
            }
        }
        // Newton can stop an ulp or two short where the density is large.
        let mut best = (x, (self.cdf(x)? - q).abs());
        let near = [-2i64, -1, 1, 2].map(|k| f64::from_bits((x.to_bits() as i64 + k) as u64));
        for y in near.into_iter().chain([lo, hi]) {
            if y > 0.0 && y < 1.0 && y != x {
                let err = (self.cdf(y)? - q).abs();
                if err < best.1 {
                    best = (y, err);
                }
            }
        }
        Ok(best.0)
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn variance(&self) -> f64 {
        let s = self.a + self.b;
        self.a * self.b / (s * s * (s + 1.0))
    }

    /// `E[1/X] = (a + b − 1)/(a − 1)`, finite for `a > 1`.
    pub fn mean_reciprocal(&self) -> Result<f64> {
        if !(self.a > 1.0) {
            return Err(Error::DomainError(format!("E[1/X] is infinite for a = {}", self.a)));
        }
        Ok((self.a + self.b - 1.0) / (self.a - 1.0))
    }

    /// `Var[1/X]`, finite for `a > 2`.
    pub fn variance_reciprocal(&self) -> Result<f64> {
        if !(self.a > 2.0) {
            return Err(Error::DomainError(format!("Var[1/X] is infinite for a = {}", self.a)));
        }
        let (a, b) = (self.a, self.b);
        let m1 = (a + b - 1.0) / (a - 1.0);
        let m2 = (a + b - 1.0) * (a + b - 2.0) / ((a - 1.0) * (a - 2.0));
        Ok(m2 - m1 * m1)
    }
}

/// Complex matrix-beta law `CB_p(m, n − m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixBetaLaw {
    p: usize,
    m: usize,
    n: usize,
}

impl MatrixBetaLaw {
    /// Requires `m ≥ p` and `n − m ≥ p`.
    pub fn new(p: usize, m: usize, n: usize) -> Result<Self> {
        if p == 0 || m < p || n < m + p {
            return Err(Error::DomainError(format!(
                "matrix beta law needs m >= p and n - m >= p, got p = {p}, m = {m}, n = {n}"
            )));
        }
        Ok(MatrixBetaLaw { p, m, n })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `ln c₅ = ln Γ̃_p(n) − ln Γ̃_p(m) − ln Γ̃_p(n − m)`.
    pub fn ln_normalizer(&self) -> f64 {
        let (p, m, n) = (self.p, self.m as f64, self.n as f64);
        ln_cmv_gamma(p, n).expect("validated") - ln_cmv_gamma(p, m).expect("validated")
            - ln_cmv_gamma(p, n - m).expect("validated")
    }

    fn exponents(&self) -> (f64, f64) {
        ((self.m - self.p) as f64, (self.n - self.m - self.p) as f64)
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.p {
            return Err(Error::BadShape(format!("expected a {0}x{0} matrix, got {1}x{1}", self.p, dim)));
        }
        Ok(())
    }
}

/// `e·ln v`, with `0·ln 0 = 0` and `e·ln 0 = −∞` for `e > 0`.
fn power_term(exponent: f64, v: f64) -> f64 {
    if exponent == 0.0 {
        0.0
    } else if v <= 0.0 {
        f64::NEG_INFINITY
    } else {
        exponent * v.ln()
    }
}

fn check_unit_spectrum(vals: &[f64]) -> Result<()> {
    for &l in vals {
        if !(-PSD_TOL..=1.0 + PSD_TOL).contains(&l) {
            return Err(Error::DomainError(format!("eigenvalue {l} outside [0, 1]")));
        }
    }
    Ok(())
}

/// `ln c₅ + (m−p) ln|W| + (n−m−p) ln|I − W|`; `−∞` on the support boundary.
pub fn matrix_beta_logpdf(w: &Hermitian, law: &MatrixBetaLaw) -> Result<f64> {
    law.check_dim(w.dim())?;
    let vals = w.eigenvalues();
    check_unit_spectrum(&vals)?;
    let (e1, e2) = law.exponents();
    let mut acc = law.ln_normalizer();
    for &l in &vals {
        acc += power_term(e1, l) + power_term(e2, 1.0 - l);
    }
    Ok(acc)
}

/// Log of the joint density of the unordered eigenvalues of `W`.
///
/// The constant is that of the ordered density; over the unordered cube
/// `[0, 1]^p` it therefore integrates to `p!`.
pub fn eig_joint_logpdf(lambda: &[f64], law: &MatrixBetaLaw) -> Result<f64> {
    law.check_dim(lambda.len())?;
    if lambda.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::DomainError(format!("eigenvalues {lambda:?} outside [0, 1]")));
    }
    let p = law.p;
    let pf = p as f64;
    let (e1, e2) = law.exponents();
    let mut acc = pf * (pf - 1.0) * PI.ln() + law.ln_normalizer() - ln_cmv_gamma(p, pf)?;
    for i in 0..p {
        for j in (i + 1)..p {
            acc += power_term(2.0, (lambda[i] - lambda[j]).abs());
        }
        acc += power_term(e1, lambda[i]) + power_term(e2, 1.0 - lambda[i]);
    }
    Ok(acc)
}

fn ln_det_power(vals: &[f64], exponent: f64) -> f64 {
    vals.iter().map(|&l| power_term(exponent, l.max(0.0))).sum()
}

/// Log-density of the compressed FIM `Ĵ` given `J`:
/// `ln c₅ + (p−n) ln|J| + (m−p) ln|Ĵ| + (n−m−p) ln|J − Ĵ|` on `0 ⪯ Ĵ ⪯ J`.
pub fn fim_after_logpdf(j_hat: &Hermitian, j: &Hermitian, law: &MatrixBetaLaw) -> Result<f64> {
    law.check_dim(j_hat.dim())?;
    law.check_dim(j.dim())?;
    let j_vals = j.eigenvalues();
    let scale = j_vals.last().copied().unwrap_or(1.0).max(1.0);
    if !(j_vals[0] > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: j_vals[0] });
    }
    let hat_vals = j_hat.eigenvalues();
    let gap_vals = j.sub(j_hat)?.eigenvalues();
    if hat_vals[0] < -PSD_TOL * scale || gap_vals[0] < -PSD_TOL * scale {
        return Err(Error::DomainError("Ĵ lies outside 0 ⪯ Ĵ ⪯ J".into()));
    }
    let (p, n) = (law.p as f64, law.n as f64);
    let (e1, e2) = law.exponents();
    let ln_det_j: f64 = j_vals.iter().map(|l| l.ln()).sum();
    Ok(law.ln_normalizer() + (p - n) * ln_det_j + ln_det_power(&hat_vals, e1) + ln_det_power(&gap_vals, e2))
}

/// Log-density of `K = Ĵ⁻¹`, from [`fim_after_logpdf`] by the change of variables
/// `Ĵ = K⁻¹` (Jacobian `|K|^{-2p}`). Support is `K ⪰ J⁻¹`.
pub fn inverse_fim_after_logpdf(k: &Hermitian, j: &Hermitian, law: &MatrixBetaLaw) -> Result<f64> {
    law.check_dim(k.dim())?;
    let j_hat = k.inverse()?;
    let ln_det_k: f64 = k.eigenvalues().iter().map(|l| l.ln()).sum();
    Ok(fim_after_logpdf(&j_hat, j, law)? - 2.0 * law.p as f64 * ln_det_k)
}

/// Law of the CRB ratio before/after, `(J⁻¹)ᵢᵢ / (Ĵ⁻¹)ᵢᵢ ~ Beta(m − p + 1, n − m)`.
pub fn crb_ratio_law(n: usize, m: usize, p: usize) -> Result<BetaLaw> {
    if p == 0 || m <= p || n <= m {
        return Err(Error::DomainError(format!("CRB ratio law needs n > m > p >= 1, got n = {n}, m = {m}, p = {p}")));
    }
    BetaLaw::new((m - p + 1) as f64, (n - m) as f64)
}

/// Law of the white-noise KL-divergence ratio `D̂ / D ~ Beta(m, n − m)`.
pub fn kl_ratio_law(n: usize, m: usize) -> Result<BetaLaw> {
    if m == 0 || n <= m {
        return Err(Error::DomainError(format!("KL ratio law needs n > m >= 1, got n = {n}, m = {m}")));
    }
    BetaLaw::new(m as f64, (n - m) as f64)
}

/// `E[Ĵ] = (m/n) J`.
pub fn mean_fim_scale(n: usize, m: usize) -> Result<f64> {
    if m == 0 || m > n {
        return Err(Error::DomainError(format!("need 1 <= m <= n, got m = {m}, n = {n}")));
    }
    Ok(m as f64 / n as f64)
}

/// `E[(Ĵ⁻¹)ᵢᵢ] / (J⁻¹)ᵢᵢ = (n − p)/(m − p)`, for `m > p`.
pub fn mean_crb_factor(n: usize, m: usize, p: usize) -> Result<f64> {
    if p == 0 || m <= p || m > n {
        return Err(Error::DomainError(format!("mean CRB needs p < m <= n, got n = {n}, m = {m}, p = {p}")));
    }
    Ok((n - p) as f64 / (m - p) as f64)
}

/// `Var[(Ĵ⁻¹)ᵢᵢ] / ((J⁻¹)ᵢᵢ)² = (n − m)(n − p) / ((m − p − 1)(m − p)²)`, for `m > p + 1`.
pub fn var_crb_factor(n: usize, m: usize, p: usize) -> Result<f64> {
    if p == 0 || m <= p + 1 || m > n {
        return Err(Error::DomainError(format!("CRB variance needs p + 1 < m <= n, got n = {n}, m = {m}, p = {p}")));
    }
    let (n, m, p) = (n as f64, m as f64, p as f64);
    Ok((n - m) * (n - p) / ((m - p - 1.0) * (m - p) * (m - p)))
}

/// Closed-form moments of the compressed FIM and of one compressed CRB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrbMoments {
    /// `E[Ĵ] = mean_fim_scale · J`.
    pub mean_fim_scale: f64,
    /// `E[(Ĵ⁻¹)ᵢᵢ]`.
    pub mean_crb: f64,
    /// `Var[(Ĵ⁻¹)ᵢᵢ]`.
    pub var_crb: f64,
}

pub fn moments(n: usize, m: usize, p: usize, j: &Hermitian, i: usize) -> Result<CrbMoments> {
    if j.dim() != p {
        return Err(Error::BadShape(format!("J is {0}x{0}, expected p = {1}", j.dim(), p)));
    }
    let crb = fisher::inverse_diagonal(j, i)?;
    Ok(CrbMoments {
        mean_fim_scale: mean_fim_scale(n, m)?,
        mean_crb: mean_crb_factor(n, m, p)? * crb,
        var_crb: var_crb_factor(n, m, p)? * crb * crb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cxla::testutil::*;
    use crate::ComplexMatrix;
    use num_complex::Complex64;
    use proptest::prelude::*;

    /// Adaptive Simpson on [a, b].
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
            let m = 0.5 * (a + b);
            let fm = f(m);
            (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
        }
        #[allow(clippy::too_many_arguments)]
        fn recurse(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, whole: f64, m: f64, fm: f64, tol: f64, depth: u32) -> f64 {
            let (lm, flm, left) = simpson(f, a, fa, m, fm);
            let (rm, frm, right) = simpson(f, m, fm, b, fb);
            let delta = left + right - whole;
            if depth == 0 || delta.abs() <= 15.0 * tol {
                return left + right + delta / 15.0;
            }
            recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
        let (fa, fb) = (f(a), f(b));
        let (m, fm, whole) = simpson(f, a, fa, b, fb);
        recurse(f, a, fa, b, fb, whole, m, fm, tol, 50)
    }

    fn gcd(a: i128, b: i128) -> i128 {
        if b == 0 { a.abs() } else { gcd(b, a % b) }
    }

    #[derive(Debug, Clone, Copy, PartialEq)]
    struct Frac(i128, i128);

    impl Frac {
        fn new(n: i128, d: i128) -> Self {
            let g = gcd(n, d);
            let s = if d < 0 { -1 } else { 1 };
            Frac(s * n / g, s * d / g)
        }
        fn mul(self, o: Frac) -> Frac {
            Frac::new(self.0 * o.0, self.1 * o.1)
        }
        fn sub(self, o: Frac) -> Frac {
            Frac::new(self.0 * o.1 - o.0 * self.1, self.1 * o.1)
        }
    }

    #[test]
    fn ln_gamma_matches_factorials_and_half_integers() {
        let mut fact = 1.0_f64;
        for k in 1..30 {
            assert!((ln_gamma(k as f64) - fact.ln()).abs() < 1e-13 * fact.ln().abs().max(1.0), "k = {k}");
            fact *= k as f64;
        }
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn ln_gamma_matches_statrs() {
        for &x in &[0.1, 0.5, 0.9, 1.5, 2.5, 7.25, 33.3, 63.0, 127.0, 400.0, 1234.5] {
            let want = statrs::function::gamma::ln_gamma(x);
            assert!((ln_gamma(x) - want).abs() < 1e-12 * want.abs().max(1.0), "x = {x}");
        }
    }

    #[test]
    fn ln_cmv_gamma_cases() {
        assert!(ln_cmv_gamma(1, 2.0).unwrap().abs() < 1e-15);
        assert!((ln_cmv_gamma(1, 5.5).unwrap() - ln_gamma(5.5)).abs() < 1e-15);
        assert!((ln_cmv_gamma(2, 2.0).unwrap() - PI.ln()).abs() < 1e-14);
        let want = 3.0 * PI.ln()
            + statrs::function::gamma::ln_gamma(5.0)
            + statrs::function::gamma::ln_gamma(4.0)
            + statrs::function::gamma::ln_gamma(3.0);
        assert!((ln_cmv_gamma(3, 5.0).unwrap() - want).abs() < 1e-12);
        assert!(ln_cmv_gamma(3, 2.0).is_err());
        assert!(ln_cmv_gamma(0, 2.0).is_err());
    }

    #[test]
    fn uniform_beta() {
        let u = BetaLaw::new(1.0, 1.0).unwrap();
        for &x in &[0.0, 0.2, 0.5, 0.999, 1.0] {
            assert!((u.pdf(x).unwrap() - 1.0).abs() < 1e-14);
            assert!((u.cdf(x).unwrap() - x).abs() < 1e-14);
        }
        assert!((u.quantile(0.5).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn figure_one_law_mean() {
        let law = crb_ratio_law(128, 64, 2).unwrap();
        assert_eq!((law.a(), law.b()), (63.0, 64.0));
        assert!((law.mean() - 63.0 / 127.0).abs() < 1e-15);
        let law = crb_ratio_law(128, 64, 1).unwrap();
        assert_eq!((law.a(), law.b()), (64.0, 64.0));
    }

    #[test]
    fn beta_pdf_integrates_to_one() {
        for &(a, b) in &[(2.0, 3.0), (63.0, 64.0), (0.5, 0.5)] {
            let law = BetaLaw::new(a, b).unwrap();
            // x = sin²t removes the endpoint singularities when a or b < 1.
            let f = |t: f64| {
                let (s, c) = t.sin_cos();
                let x = s * s;
                if x <= 0.0 || x >= 1.0 {
                    return 0.0;
                }
                law.pdf(x).unwrap() * 2.0 * s * c
            };
            let total = adaptive_simpson(&f, 0.0, PI / 2.0, 1e-12);
            assert!((total - 1.0).abs() < 1e-8, "({a}, {b}) -> {total}");
        }
    }

    #[test]
    fn beta_cdf_matches_statrs() {
        for &(a, b) in &[(0.5, 0.5), (2.0, 3.0), (63.0, 64.0), (8.0, 24.0), (200.0, 200.0), (1.0, 150.0), (150.0, 2.0)] {
            let law = BetaLaw::new(a, b).unwrap();
            for k in 1..100 {
                let x = k as f64 / 100.0;
                let want = statrs::function::beta::beta_reg(a, b, x);
                let got = law.cdf(x).unwrap();
                assert!((got - want).abs() < 1e-12, "({a}, {b}, {x}): {got} vs {want}");
                assert!((law.sf(x).unwrap() - (1.0 - want)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn beta_cdf_agrees_with_quadrature() {
        let law = BetaLaw::new(3.5, 7.25).unwrap();
        for &x in &[0.05, 0.2, 0.3, 0.6, 0.9] {
            let q = adaptive_simpson(&|t| law.pdf(t).unwrap(), 0.0, x, 1e-14);
            assert!((law.cdf(x).unwrap() - q).abs() < 1e-11);
        }
    }

    #[test]
    fn quantile_round_trip() {
        for &(a, b) in &[(0.5, 0.5), (1.0, 1.0), (2.0, 3.0), (63.0, 64.0), (200.0, 200.0), (200.0, 1.5), (0.7, 200.0)] {
            let law = BetaLaw::new(a, b).unwrap();
            for k in 1..1000 {
                let q = k as f64 / 1000.0;
                let x = law.quantile(q).unwrap();
                assert!((law.cdf(x).unwrap() - q).abs() < 1e-10, "({a}, {b}) q = {q}");
            }
        }
    }

    #[test]
    fn quantile_is_best_double_in_steep_tail() {
        // Near x = 1 with b < 1 adjacent doubles differ in cdf by ~1e-8, so no
        // x can round-trip to 1e-9; the answer must still be the closest one.
        let law = BetaLaw::new(200.0, 0.5).unwrap();
        let q = 1.0 - 1e-6;
        let x = law.quantile(q).unwrap();
        let err = |y: f64| (law.cdf(y).unwrap() - q).abs();
        for k in [-3i64, -2, -1, 1, 2, 3] {
            let y = f64::from_bits((x.to_bits() as i64 + k) as u64);
            if y < 1.0 {
                assert!(err(x) <= err(y), "{k} ulps away is closer");
            }
        }
        let up = f64::from_bits(x.to_bits() + 1);
        assert!(err(x) <= 0.5 * (law.cdf(up).unwrap() - law.cdf(x).unwrap()).abs() + 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(BetaLaw::new(0.0, 1.0).is_err());
        let law = BetaLaw::new(2.0, 2.0).unwrap();
        assert!(law.cdf(1.5).is_err());
        assert!(law.pdf(-0.1).is_err());
        assert!(law.quantile(1.1).is_err());
        assert!(crb_ratio_law(10, 2, 2).is_err());
        assert!(crb_ratio_law(10, 10, 2).is_err());
        assert!(kl_ratio_law(4, 4).is_err());
        assert!(MatrixBetaLaw::new(2, 1, 8).is_err());
        assert!(MatrixBetaLaw::new(2, 7, 8).is_err());
    }

    #[test]
    fn kl_ratio_law_cases() {
        let u = kl_ratio_law(2, 1).unwrap();
        assert_eq!((u.a(), u.b()), (1.0, 1.0));
        let l = kl_ratio_law(32, 8).unwrap();
        assert!((l.mean() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn reciprocal_moments_match_closed_forms_exactly() {
        // E[1/X] and Var[1/X] for X ~ Beta(m−p+1, n−m) against the CRB moment
        // formulas, in exact rational arithmetic.
        for n in 4..40i128 {
            for p in 1..4i128 {
                for m in (p + 2)..n {
                    let (a, b) = (m - p + 1, n - m);
                    let e1 = Frac::new(a + b - 1, a - 1);
                    let e2 = Frac::new((a + b - 1) * (a + b - 2), (a - 1) * (a - 2));
                    let var = e2.sub(e1.mul(e1));
                    assert_eq!(e1, Frac::new(n - p, m - p));
                    assert_eq!(var, Frac::new((n - m) * (n - p), (m - p - 1) * (m - p) * (m - p)));
                    let law = BetaLaw::new(a as f64, b as f64).unwrap();
                    let mf = mean_crb_factor(n as usize, m as usize, p as usize).unwrap();
                    let vf = var_crb_factor(n as usize, m as usize, p as usize).unwrap();
                    assert!((law.mean_reciprocal().unwrap() - mf).abs() < 1e-12 * mf);
                    assert!((law.variance_reciprocal().unwrap() - vf).abs() < 1e-9 * vf.max(1e-12));
                }
            }
        }
    }

    #[test]
    fn moments_cases() {
        let j = Hermitian::from_real_diagonal(&[4.0, 2.0]);
        let none = moments(10, 10, 2, &j, 0).unwrap();
        assert_eq!(none.mean_fim_scale, 1.0);
        assert!((none.mean_crb - 0.25).abs() < 1e-15);
        assert_eq!(none.var_crb, 0.0);
        let mo = moments(128, 64, 2, &j, 1).unwrap();
        assert!((mo.mean_crb - 0.5 * 126.0 / 62.0).abs() < 1e-14);
        assert!((var_crb_factor(16, 8, 2).unwrap() - 112.0 / 180.0).abs() < 1e-15);
        assert!(moments(10, 3, 2, &j, 0).is_err());
    }

    #[test]
    fn matrix_beta_reduces_to_scalar_beta() {
        let law = MatrixBetaLaw::new(1, 2, 4).unwrap();
        let w = Hermitian::from_real_diagonal(&[0.5]);
        assert!((matrix_beta_logpdf(&w, &law).unwrap().exp() - 1.5).abs() < 1e-13);
        for &(m, n) in &[(3usize, 7usize), (64, 128), (1, 2)] {
            let law = MatrixBetaLaw::new(1, m, n).unwrap();
            let beta = BetaLaw::new(m as f64, (n - m) as f64).unwrap();
            for k in 1..100 {
                let x = k as f64 / 100.0;
                let got = matrix_beta_logpdf(&Hermitian::from_real_diagonal(&[x]), &law).unwrap();
                let eig = eig_joint_logpdf(&[x], &law).unwrap();
                let want = beta.ln_pdf(x).unwrap();
                assert!((got - want).abs() < 1e-12, "m = {m}, n = {n}, x = {x}");
                assert!((eig - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matrix_beta_boundary_and_domain() {
        let law = MatrixBetaLaw::new(2, 4, 12).unwrap();
        let edge = Hermitian::from_real_diagonal(&[0.0, 0.5]);
        assert_eq!(matrix_beta_logpdf(&edge, &law).unwrap(), f64::NEG_INFINITY);
        let edge = Hermitian::from_real_diagonal(&[1.0, 0.5]);
        assert_eq!(matrix_beta_logpdf(&edge, &law).unwrap(), f64::NEG_INFINITY);
        let outside = Hermitian::from_real_diagonal(&[1.1, 0.5]);
        assert!(matrix_beta_logpdf(&outside, &law).is_err());
        // Zero exponents keep the boundary finite.
        let flat = MatrixBetaLaw::new(2, 2, 4).unwrap();
        assert!(matrix_beta_logpdf(&Hermitian::from_real_diagonal(&[0.0, 1.0]), &flat).unwrap().is_finite());
        assert!(matrix_beta_logpdf(&Hermitian::identity(3), &law).is_err());
    }

    #[test]
    fn matrix_beta_density_integrates_to_one_over_hermitian_matrices() {
        // 2x2 Hermitian W = [[a, c], [c̄, d]], Lebesgue measure da dd dRe(c) dIm(c).
        // Support 0 ⪯ W ⪯ I confines a, d to [0, 1] and |c| to 1/2.
        let law = MatrixBetaLaw::new(2, 4, 12).unwrap();
        let k = 32;
        let h_diag = 1.0 / k as f64;
        let h_off = 1.0 / k as f64;
        let mut total = 0.0;
        for ia in 0..k {
            let a = (ia as f64 + 0.5) * h_diag;
            for id in 0..k {
                let d = (id as f64 + 0.5) * h_diag;
                for ir in 0..k {
                    let re = -0.5 + (ir as f64 + 0.5) * h_off;
                    for ii in 0..k {
                        let im = -0.5 + (ii as f64 + 0.5) * h_off;
                        let c2 = re * re + im * im;
                        if a * d - c2 <= 0.0 || (1.0 - a) * (1.0 - d) - c2 <= 0.0 {
                            continue;
                        }
                        let w = ComplexMatrix::from_row_slice(
                            2,
                            2,
                            &[Complex64::new(a, 0.0), Complex64::new(re, im), Complex64::new(re, -im), Complex64::new(d, 0.0)],
                        );
                        let lp = matrix_beta_logpdf(&Hermitian::new(w).unwrap(), &law).unwrap();
                        total += lp.exp();
                    }
                }
            }
        }
        total *= h_diag * h_diag * h_off * h_off;
        assert!((total - 1.0).abs() < 0.05, "integral {total}");
    }

    #[test]
    fn eig_joint_density_integrates_to_p_factorial() {
        let law = MatrixBetaLaw::new(2, 4, 12).unwrap();
        // Composite Simpson on [0, 1]²; the integrand is a polynomial.
        let k = 200;
        let h = 1.0 / k as f64;
        let weight = |i: usize| if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let mut total = 0.0;
        for i in 0..=k {
            for j in 0..=k {
                let v = eig_joint_logpdf(&[i as f64 * h, j as f64 * h], &law).unwrap().exp();
                total += weight(i) * weight(j) * v;
            }
        }
        total *= h * h / 9.0;
        assert!((total - 2.0).abs() < 1e-6, "integral {total}");
    }

    #[test]
    fn eig_joint_is_symmetric() {
        let law = MatrixBetaLaw::new(3, 5, 14).unwrap();
        let a = eig_joint_logpdf(&[0.1, 0.5, 0.3], &law).unwrap();
        let b = eig_joint_logpdf(&[0.3, 0.1, 0.5], &law).unwrap();
        assert!((a - b).abs() < 1e-13);
        assert_eq!(eig_joint_logpdf(&[0.2, 0.2, 0.5], &law).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn fim_after_change_of_variables() {
        let mut r = rng(40);
        let law = MatrixBetaLaw::new(2, 6, 20).unwrap();
        for _ in 0..10 {
            let j = random_pd(&mut r, 2);
            let g = random_matrix(&mut r, 20, 2);
            let phi = random_matrix(&mut r, 6, 20);
            let jh_raw = fisher::compressed_fim(&g, &phi, 1.0).unwrap();
            // Map the sampled W onto this J: Ĵ = J^{1/2} W J^{1/2}.
            let full = fisher::fim(&g, 1.0).unwrap();
            let w = fisher::normalized_fim(&full, &jh_raw).unwrap();
            let root = crate::cxla::hermitian_sqrt(&j).unwrap();
            let j_hat = Hermitian::new(&root * w.matrix().as_matrix() * &root).unwrap();
            let lhs = fim_after_logpdf(&j_hat, &j, &law).unwrap();
            let ln_det_j = crate::cxla::logdet_hpd(&j).unwrap();
            let rhs = matrix_beta_logpdf(w.matrix(), &law).unwrap() - 2.0 * ln_det_j;
            assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn fim_after_identity_j_reduces_to_matrix_beta() {
        let law = MatrixBetaLaw::new(2, 4, 12).unwrap();
        let mut r = rng(41);
        let w = {
            let g = random_matrix(&mut r, 12, 2);
            let phi = random_matrix(&mut r, 4, 12);
            let full = fisher::fim(&g, 1.0).unwrap();
            let jh = fisher::compressed_fim(&g, &phi, 1.0).unwrap();
            fisher::normalized_fim(&full, &jh).unwrap()
        };
        let a = fim_after_logpdf(w.matrix(), &Hermitian::identity(2), &law).unwrap();
        let b = matrix_beta_logpdf(w.matrix(), &law).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn fim_after_matches_cofactor_determinants() {
        let mut r = rng(42);
        let law = MatrixBetaLaw::new(2, 6, 20).unwrap();
        let j = random_pd(&mut r, 2);
        let j_hat = j.scale(0.5);
        let det = |a: &ComplexMatrix| cofactor_det(a).re;
        let (p, m, n) = (2.0, 6.0, 20.0);
        let c5 = ln_cmv_gamma(2, n).unwrap() - ln_cmv_gamma(2, m).unwrap() - ln_cmv_gamma(2, n - m).unwrap();
        let want = c5
            + (p - n) * det(j.as_matrix()).ln()
            + (m - p) * det(j_hat.as_matrix()).ln()
            + (n - m - p) * det(&(j.as_matrix() - j_hat.as_matrix())).ln();
        let got = fim_after_logpdf(&j_hat, &j, &law).unwrap();
        assert!((got - want).abs() < 1e-9 * want.abs().max(1.0));
        assert!(fim_after_logpdf(&j.scale(1.5), &j, &law).is_err());
    }

    #[test]
    fn inverse_fim_density_matches_direct_formula() {
        // c₅ |J|^{p−n} |K|^{−n} |JK − I|^{n−m−p}, evaluated with cofactor determinants.
        let mut r = rng(43);
        let law = MatrixBetaLaw::new(2, 5, 16).unwrap();
        let j = random_pd(&mut r, 2);
        let g = random_matrix(&mut r, 16, 2);
        let phi = random_matrix(&mut r, 5, 16);
        let w = fisher::normalized_fim(&fisher::fim(&g, 1.0).unwrap(), &fisher::compressed_fim(&g, &phi, 1.0).unwrap()).unwrap();
        let root = crate::cxla::hermitian_sqrt(&j).unwrap();
        let j_hat = Hermitian::new(&root * w.matrix().as_matrix() * &root).unwrap();
        let k = j_hat.inverse().unwrap();
        let (p, m, n) = (2.0, 5.0, 16.0);
        let det = |a: &ComplexMatrix| cofactor_det(a).re;
        let jk_minus_i = j.as_matrix() * k.as_matrix() - ComplexMatrix::identity(2, 2);
        let want = law.ln_normalizer() + (p - n) * det(j.as_matrix()).ln() - n * det(k.as_matrix()).ln()
            + (n - m - p) * det(&jk_minus_i).ln();
        let got = inverse_fim_after_logpdf(&k, &j, &law).unwrap();
        assert!((got - want).abs() < 1e-8 * want.abs().max(1.0), "{got} vs {want}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn quantile_inverts_cdf(a in 0.3f64..200.0, b in 0.3f64..200.0, x in 0.001f64..0.999) {
            let law = BetaLaw::new(a, b).unwrap();
            let q = law.cdf(x).unwrap();
            prop_assume!(q > 1e-3 && q < 1.0 - 1e-3);
            let back = law.quantile(q).unwrap();
            prop_assert!((back - x).abs() < 1e-9, "a={} b={} x={} back={}", a, b, x, back);
        }

        #[test]
        fn matrix_beta_p1_equals_beta(m in 1usize..60, extra in 1usize..60, x in 0.001f64..0.999) {
            let n = m + extra;
            let law = MatrixBetaLaw::new(1, m, n).unwrap();
            let beta = BetaLaw::new(m as f64, extra as f64).unwrap();
            let got = matrix_beta_logpdf(&Hermitian::from_real_diagonal(&[x]), &law).unwrap();
            prop_assert!((got - beta.ln_pdf(x).unwrap()).abs() < 1e-12);
        }
    }
}
