//! Signal models: the mean map `θ ↦ x(θ) ∈ Cⁿ` and its Jacobian `G`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{ComplexMatrix, ComplexVector, Error, Result};

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// A mean-vector model with real parameters.
///
/// Column `i` of [`SignalModel::jacobian`] is `∂x/∂θᵢ`.
pub trait SignalModel: Send + Sync {
    /// Ambient dimension `n`.
    fn dim(&self) -> usize;
    /// Parameter count `p`.
    fn num_params(&self) -> usize;
    fn mean(&self, theta: &[f64]) -> ComplexVector;
    fn jacobian(&self, theta: &[f64]) -> ComplexMatrix;
}

/// One narrowband source seen by a uniform line array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Source {
    /// Electrical angle in radians.
    pub theta: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Phase in radians.
    #[serde(default)]
    pub phase: f64,
}

fn one() -> f64 {
    1.0
}

impl Source {
    pub fn new(theta: f64, amplitude: f64, phase: f64) -> Self {
        Source { theta, amplitude, phase }
    }
}

/// Uniform line array with `n` elements and known source amplitudes and phases.
///
/// Element `k` (for `k = 0..n`) of the mean is `Σᵢ Aᵢ e^{jφᵢ} e^{jkθᵢ}`; the
/// unknown parameters are the electrical angles only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UlaScenario {
    pub n: usize,
    pub sources: Vec<Source>,
}

impl UlaScenario {
    pub fn new(n: usize, sources: Vec<Source>) -> Result<Self> {
        let s = UlaScenario { n, sources };
        s.validate()?;
        Ok(s)
    }

    /// Two unit sources at electrical angles 0 and π/n (half the Rayleigh limit).
    pub fn two_source_half_rayleigh(n: usize) -> Self {
        UlaScenario {
            n,
            sources: vec![
                Source::new(0.0, 1.0, 0.0),
                Source::new(std::f64::consts::PI / n as f64, 1.0, 0.0),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::DomainError(format!("array needs n >= 2 elements, got {}", self.n)));
        }
        if self.sources.is_empty() {
            return Err(Error::DomainError("at least one source is required".into()));
        }
        for (i, s) in self.sources.iter().enumerate() {
            if !(s.amplitude > 0.0) || !s.theta.is_finite() || !s.phase.is_finite() {
                return Err(Error::DomainError(format!("source {i} is invalid: {s:?}")));
            }
        }
        if self.n <= self.sources.len() {
            return Err(Error::DomainError(format!(
                "need n > p, got n = {} with {} sources",
                self.n,
                self.sources.len()
            )));
        }
        Ok(())
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.theta).collect()
    }

    fn check_theta(&self, theta: &[f64]) {
        assert_eq!(theta.len(), self.sources.len(), "parameter vector length");
    }
}

/// Mean vector of the scenario at its stored angles.
pub fn ula_mean(s: &UlaScenario) -> ComplexVector {
    s.mean(&s.thetas())
}

/// Jacobian of the scenario at its stored angles (`n × p`, one column per source).
pub fn ula_jacobian(s: &UlaScenario) -> ComplexMatrix {
    s.jacobian(&s.thetas())
}

impl SignalModel for UlaScenario {
    fn dim(&self) -> usize {
        self.n
    }

    fn num_params(&self) -> usize {
        self.sources.len()
    }

    fn mean(&self, theta: &[f64]) -> ComplexVector {
        self.check_theta(theta);
        ComplexVector::from_fn(self.n, |k, _| {
            self.sources
                .iter()
                .zip(theta)
                .map(|(s, &t)| Complex64::from_polar(s.amplitude, s.phase + k as f64 * t))
                .sum()
        })
    }

    fn jacobian(&self, theta: &[f64]) -> ComplexMatrix {
        self.check_theta(theta);
        ComplexMatrix::from_fn(self.n, self.sources.len(), |k, i| {
            let s = &self.sources[i];
            let k = k as f64;
            Complex64::new(0.0, k) * Complex64::from_polar(s.amplitude, s.phase + k * theta[i])
        })
    }
}

/// Linear model `x(θ) = Gθ` with a fixed Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    g: ComplexMatrix,
}

impl LinearModel {
    pub fn new(g: ComplexMatrix) -> Result<Self> {
        crate::cxla::ensure_finite(&g)?;
        if g.ncols() == 0 || g.nrows() <= g.ncols() {
            return Err(Error::BadShape(format!(
                "Jacobian must be n x p with n > p >= 1, got {}x{}",
                g.nrows(),
                g.ncols()
            )));
        }
        Ok(LinearModel { g })
    }

    pub fn jacobian_matrix(&self) -> &ComplexMatrix {
        &self.g
    }
}

impl SignalModel for LinearModel {
    fn dim(&self) -> usize {
        self.g.nrows()
    }

    fn num_params(&self) -> usize {
        self.g.ncols()
    }

    fn mean(&self, theta: &[f64]) -> ComplexVector {
        let t = ComplexVector::from_iterator(theta.len(), theta.iter().map(|&x| Complex64::new(x, 0.0)));
        &self.g * t
    }

    fn jacobian(&self, _theta: &[f64]) -> ComplexMatrix {
        self.g.clone()
    }
}

/// Central-difference Jacobian `(x(θ + h·eᵢ) − x(θ − h·eᵢ)) / 2h`.
pub fn finite_diff_jacobian(model: &dyn SignalModel, theta: &[f64], h: f64) -> Result<ComplexMatrix> {
    if !(h > 0.0) {
        return Err(Error::DomainError(format!("step must be positive, got {h}")));
    }
    if theta.len() != model.num_params() {
        return Err(Error::BadShape(format!(
            "parameter vector of length {} for a {}-parameter model",
            theta.len(),
            model.num_params()
        )));
    }
    let mut g = ComplexMatrix::zeros(model.dim(), model.num_params());
    let mut t = theta.to_vec();
    for i in 0..theta.len() {
        t[i] = theta[i] + h;
        let plus = model.mean(&t);
        t[i] = theta[i] - h;
        let minus = model.mean(&t);
        t[i] = theta[i];
        g.set_column(i, &((plus - minus) / Complex64::new(2.0 * h, 0.0)));
    }
    Ok(g)
}
