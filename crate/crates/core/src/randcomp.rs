//! Random compression ensembles with right-unitarily invariant distributions.
//!
//! Every draw comes from a per-trial ChaCha20 stream keyed by `(seed, trial)`,
//! so a trial's matrix never depends on which other trials ran or in what order.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{ComplexMatrix, Error, Result};

pub type TrialRng = ChaCha20Rng;

/// Independent stream for one Monte Carlo trial.
pub fn derive_stream(seed: u64, trial: u64) -> TrialRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// I.i.d. proper complex normal entries.
    Gaussian,
    /// Haar-distributed row-orthonormal frames, `ΦΦᴴ = I`.
    Stiefel,
    /// I.i.d. rows `r·u` with `u` uniform on the complex unit sphere.
    SphericalRows,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Gaussian, Family::Stiefel, Family::SphericalRows];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Stiefel => "stiefel",
            Family::SphericalRows => "spherical_rows",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::BadSpec(format!("unknown compressor family '{s}'")))
    }
}

/// Radial law of a spherical-row draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialLaw {
    /// `‖row‖² ~ (v/2)·χ²(2n)`, the norm law of a Gaussian row.
    #[default]
    Chi,
    /// Every row has norm `√(n·v)`.
    Constant,
}

fn default_variance() -> f64 {
    1.0
}

/// Description of a compression ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressorSpec {
    pub m: usize,
    pub n: usize,
    pub family: Family,
    /// Complex entry variance for `gaussian`; sets the row scale for `spherical_rows`.
    /// No projector-based statistic depends on it.
    #[serde(default = "default_variance")]
    pub element_variance: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub radial: RadialLaw,
}

impl CompressorSpec {
    pub fn new(m: usize, n: usize, family: Family, seed: u64) -> Self {
        CompressorSpec {
            m,
            n,
            family,
            element_variance: 1.0,
            seed,
            radial: RadialLaw::default(),
        }
    }

    pub fn with_variance(mut self, v: f64) -> Self {
        self.element_variance = v;
        self
    }

    pub fn with_radial(mut self, radial: RadialLaw) -> Self {
        self.radial = radial;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > self.n {
            return Err(Error::BadSpec(format!("need 1 <= m <= n, got m = {}, n = {}", self.m, self.n)));
        }
        if !(self.element_variance > 0.0 && self.element_variance.is_finite()) {
            return Err(Error::BadSpec(format!(
                "element variance must be positive, got {}",
                self.element_variance
            )));
        }
        Ok(())
    }

    /// The draw for `trial` under this spec's seed.
    pub fn draw(&self, trial: u64) -> Result<ComplexMatrix> {
        sample(self, &mut derive_stream(self.seed, trial))
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, std_per_part: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * std_per_part, im * std_per_part)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, m: usize, n: usize, variance: f64) -> ComplexMatrix {
    let s = (variance / 2.0).sqrt();
    let mut phi = ComplexMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            phi[(i, j)] = complex_normal(rng, s);
        }
    }
    phi
}

/// Draw one `m × n` compressor.
///
/// `gaussian` entries have independent real and imaginary parts, each
/// `N(0, v/2)`. `stiefel` orthonormalizes the rows of a Gaussian `Z` by a QR
/// factorization with the phase ambiguity removed.
pub fn sample<R: Rng + ?Sized>(spec: &CompressorSpec, rng: &mut R) -> Result<ComplexMatrix> {
    spec.validate()?;
    let (m, n) = (spec.m, spec.n);
    match spec.family {
        Family::Gaussian => Ok(gaussian(rng, m, n, spec.element_variance)),
        Family::Stiefel => {
            // Zᴴ = QR with R's diagonal made real positive; then Q is Haar on
            // the Stiefel manifold and Φ = Qᴴ.
            let qr = gaussian(rng, m, n, 1.0).adjoint().qr();
            let mut q = qr.q();
            let r = qr.r();
            for (j, mut col) in q.column_iter_mut().enumerate() {
                let d = r[(j, j)];
                let norm = d.norm();
                if norm > 0.0 {
                    col *= d / norm;
                }
            }
            Ok(q.adjoint())
        }
        Family::SphericalRows => {
            let v = spec.element_variance;
            let chi = ChiSquared::new(2.0 * n as f64).expect("positive degrees of freedom");
            let mut phi = ComplexMatrix::zeros(m, n);
            for i in 0..m {
                let mut row: Vec<Complex64> = (0..n).map(|_| complex_normal(rng, 1.0)).collect();
                let norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let radius = match spec.radial {
                    RadialLaw::Chi => (0.5 * v * chi.sample(rng)).sqrt(),
                    RadialLaw::Constant => (n as f64 * v).sqrt(),
                };
                for z in row.iter_mut() {
                    *z *= radius / norm;
                }
                for (j, z) in row.into_iter().enumerate() {
                    phi[(i, j)] = z;
                }
            }
            Ok(phi)
        }
    }
}
