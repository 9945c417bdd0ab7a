//! Smooth, at most quadratic external potentials.
//!
//! Every built-in kind separates variables, `V(x) = sum_j V_j(x_j)`, so Hessians
//! are diagonal and the Gaussian closure applies dimension by dimension.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights (8 points) mapped to `[0, 1]`.
const GL8: [(f64, f64); 8] = {
    const X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const W: [f64; 4] = [
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    [
        ((1.0 - X[3]) / 2.0, W[3] / 2.0),
        ((1.0 - X[2]) / 2.0, W[2] / 2.0),
        ((1.0 - X[1]) / 2.0, W[1] / 2.0),
        ((1.0 - X[0]) / 2.0, W[0] / 2.0),
        ((1.0 + X[0]) / 2.0, W[0] / 2.0),
        ((1.0 + X[1]) / 2.0, W[1] / 2.0),
        ((1.0 + X[2]) / 2.0, W[2] / 2.0),
        ((1.0 + X[3]) / 2.0, W[3] / 2.0),
    ]
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialKind {
    Zero { dim: usize },
    /// `1/2 sum_j omega_j^2 x_j^2`
    Harmonic { omega: Vec<f64> },
    /// `-1/2 omega^2 |x|^2`
    InvertedHarmonic { omega: f64, dim: usize },
    /// `sum_j c_j cos(x_j)`
    Cosine { coeffs: Vec<f64> },
    /// `1/2 sum_j omega_j^2 x_j^2 + sum_j c_j cos(x_j)`
    HarmonicCosine { omega: Vec<f64>, coeffs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major `d x d`.
    pub hessian: Vec<f64>,
}

/// A validated potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialKind", into = "PotentialKind")]
pub struct PotentialSpec {
    kind: PotentialKind,
}

impl TryFrom<PotentialKind> for PotentialSpec {
    type Error = Error;

    fn try_from(kind: PotentialKind) -> Result<Self> {
        PotentialSpec::new(kind)
    }
}

impl From<PotentialSpec> for PotentialKind {
    fn from(p: PotentialSpec) -> Self {
        p.kind
    }
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be finite")))
    }
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind) -> Result<Self> {
        match &kind {
            PotentialKind::Zero { dim } | PotentialKind::InvertedHarmonic { dim, .. } if *dim == 0 => {
                return Err(Error::param("potential dimension must be >= 1"));
            }
            PotentialKind::InvertedHarmonic { omega, .. } => check_finite("omega", &[*omega])?,
            PotentialKind::Harmonic { omega } => {
                if omega.is_empty() {
                    return Err(Error::param("harmonic potential needs at least one frequency"));
                }
                check_finite("omega", omega)?;
            }
            PotentialKind::Cosine { coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::param("cosine potential needs at least one coefficient"));
                }
                check_finite("coeffs", coeffs)?;
            }
            PotentialKind::HarmonicCosine { omega, coeffs } => {
                if omega.is_empty() || omega.len() != coeffs.len() {
                    return Err(Error::param("harmonic_cosine needs matching, nonempty omega and coeffs"));
                }
                check_finite("omega", omega)?;
                check_finite("coeffs", coeffs)?;
            }
            PotentialKind::Zero { .. } => {}
        }
        Ok(PotentialSpec { kind })
    }

    pub fn zero(dim: usize) -> Self {
        PotentialSpec { kind: PotentialKind::Zero { dim: dim.max(1) } }
    }

    pub fn harmonic(omega: &[f64]) -> Result<Self> {
        Self::new(PotentialKind::Harmonic { omega: omega.to_vec() })
    }

    pub fn inverted_harmonic(omega: f64, dim: usize) -> Result<Self> {
        Self::new(PotentialKind::InvertedHarmonic { omega, dim })
    }

    pub fn cosine(coeffs: &[f64]) -> Result<Self> {
        Self::new(PotentialKind::Cosine { coeffs: coeffs.to_vec() })
    }

    pub fn harmonic_cosine(omega: &[f64], coeffs: &[f64]) -> Result<Self> {
        Self::new(PotentialKind::HarmonicCosine { omega: omega.to_vec(), coeffs: coeffs.to_vec() })
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            PotentialKind::Zero { dim } | PotentialKind::InvertedHarmonic { dim, .. } => *dim,
            PotentialKind::Harmonic { omega } | PotentialKind::HarmonicCosine { omega, .. } => omega.len(),
            PotentialKind::Cosine { coeffs } => coeffs.len(),
        }
    }

    /// All built-in kinds decouple variables.
    pub fn is_separable(&self) -> bool {
        true
    }

    /// `true` when `V` is exactly quadratic, so that `V^eps` does not depend on `eps`.
    pub fn is_quadratic(&self) -> bool {
        matches!(
            self.kind,
            PotentialKind::Zero { .. } | PotentialKind::Harmonic { .. } | PotentialKind::InvertedHarmonic { .. }
        )
    }

    /// Uniform bound on third derivatives.
    pub fn third_derivative_bound(&self) -> f64 {
        match &self.kind {
            PotentialKind::Cosine { coeffs } | PotentialKind::HarmonicCosine { coeffs, .. } => {
                coeffs.iter().map(|c| c.abs()).sum()
            }
            _ => 0.0,
        }
    }

    /// `(V_j(s), V_j'(s), V_j''(s))` for the one-dimensional factor `j`.
    pub fn component(&self, j: usize, s: f64) -> (f64, f64, f64) {
        match &self.kind {
            PotentialKind::Zero { .. } => (0.0, 0.0, 0.0),
            PotentialKind::Harmonic { omega } => {
                let w2 = omega[j] * omega[j];
                (0.5 * w2 * s * s, w2 * s, w2)
            }
            PotentialKind::InvertedHarmonic { omega, .. } => {
                let w2 = omega * omega;
                (-0.5 * w2 * s * s, -w2 * s, -w2)
            }
            PotentialKind::Cosine { coeffs } => {
                let c = coeffs[j];
                let (sn, cs) = s.sin_cos();
                (c * cs, -c * sn, -c * cs)
            }
            PotentialKind::HarmonicCosine { omega, coeffs } => {
                let w2 = omega[j] * omega[j];
                let c = coeffs[j];
                let (sn, cs) = s.sin_cos();
                (0.5 * w2 * s * s + c * cs, w2 * s - c * sn, w2 - c * cs)
            }
        }
    }

    pub fn second_derivative(&self, j: usize, s: f64) -> f64 {
        self.component(j, s).2
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (0..self.dim()).map(|j| self.component(j, x[j]).0).sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|j| self.component(j, x[j]).1).collect()
    }

    /// Diagonal of the Hessian.
    pub fn hessian_diag(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|j| self.component(j, x[j]).2).collect()
    }

    pub fn eval(&self, x: &[f64]) -> PotentialEval {
        let d = self.dim();
        let mut value = 0.0;
        let mut gradient = vec![0.0; d];
        let mut hessian = vec![0.0; d * d];
        for j in 0..d {
            let (v, g, h) = self.component(j, x[j]);
            value += v;
            gradient[j] = g;
            hessian[j * d + j] = h;
        }
        PotentialEval { value, gradient, hessian }
    }

    /// `1/2 <y, Hess V(q) y>`.
    pub fn quadratic_part(&self, q: &[f64], y: &[f64]) -> f64 {
        (0..self.dim())
            .map(|j| 0.5 * self.second_derivative(j, q[j]) * y[j] * y[j])
            .sum()
    }

    /// Rescaled potential seen by the envelope,
    /// `V^eps(y) = int_0^1 (1 - theta) <y, Hess V(q + theta sqrt(eps) y) y> dtheta`,
    /// by 8-point Gauss-Legendre quadrature. This equals
    /// `(V(q + sqrt(eps) y) - V(q) - sqrt(eps) y . grad V(q)) / eps` without the
    /// cancellation that form suffers at small `eps`.
    pub fn veps(&self, q: &[f64], eps: f64, y: &[f64]) -> Result<f64> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::param(format!("eps must be positive, got {eps}")));
        }
        Ok(self.veps_unchecked(q, eps.sqrt(), y))
    }

    pub(crate) fn veps_unchecked(&self, q: &[f64], sqrt_eps: f64, y: &[f64]) -> f64 {
        if self.is_quadratic() {
            // Hessian is constant: the quadrature weights sum to 1/2
            return self.quadratic_part(q, y);
        }
        (0..self.dim()).map(|j| self.veps_component(j, q[j], sqrt_eps, y[j])).sum()
    }

    /// One-dimensional factor `j` of [`PotentialSpec::veps`].
    pub(crate) fn veps_component(&self, j: usize, qj: f64, sqrt_eps: f64, yj: f64) -> f64 {
        let integral: f64 = GL8
            .iter()
            .map(|&(theta, w)| w * (1.0 - theta) * self.second_derivative(j, qj + theta * sqrt_eps * yj))
            .sum();
        integral * yj * yj
    }
}
