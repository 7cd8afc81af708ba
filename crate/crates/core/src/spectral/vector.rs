use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Constant in `|x| <= C ‖x‖` between the L² norm and the H¹₀ norm on (0,1).
pub const SOBOLEV_EMBEDDING: f64 = 1.0 / PI;

/// Decay rate of the Dirichlet heat semigroup, the first Laplacian eigenvalue π².
pub const SEMIGROUP_DECAY: f64 = PI * PI;

/// Dirichlet Laplacian eigenvalue `(nπ)²` of the 1-based mode `n`.
#[inline]
pub fn eigenvalue(mode: usize) -> f64 {
    let k = mode as f64 * PI;
    k * k
}

/// Truncated element of H = H¹₀(0,1).
///
/// `coeffs[n - 1]` is the coefficient of `e_n(ζ) = √2 sin(nπζ)`, a basis that is
/// orthonormal in L². The H inner product is `⟨⟨x, y⟩⟩ = Σ (nπ)² x_n y_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct HilbertVector {
    coeffs: Vec<f64>,
}

impl HilbertVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(invalid("a Hilbert vector needs at least one mode"));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(invalid(format!("coefficient {} is not finite", i + 1)));
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(modes: usize) -> Self {
        assert!(modes > 0, "at least one mode");
        Self { coeffs: vec![0.0; modes] }
    }

    /// Coefficient vector with a single nonzero entry `amplitude` at 1-based `mode`.
    pub fn mode(modes: usize, mode: usize, amplitude: f64) -> Self {
        assert!(mode >= 1 && mode <= modes, "mode index out of range");
        let mut v = Self::zeros(modes);
        v.coeffs[mode - 1] = amplitude;
        v
    }

    /// The 1-based `mode` scaled to unit H-norm, `e_n / (nπ)`.
    pub fn unit_mode(modes: usize, mode: usize) -> Self {
        Self::mode(modes, mode, 1.0 / eigenvalue(mode).sqrt())
    }

    #[inline]
    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    #[inline]
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    #[inline]
    pub(crate) fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn h_norm_sq(&self) -> f64 {
        h_norm_sq(&self.coeffs)
    }

    pub fn h_norm(&self) -> f64 {
        self.h_norm_sq().sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn h_inner(&self, other: &Self) -> f64 {
        h_inner(&self.coeffs, &other.coeffs)
    }

    pub fn l2_inner(&self, other: &Self) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn h_distance(&self, other: &Self) -> f64 {
        h_distance(&self.coeffs, &other.coeffs)
    }

    /// `self += scale * other`.
    pub fn axpy(&mut self, scale: f64, other: &Self) {
        axpy(&mut self.coeffs, scale, &other.coeffs);
    }

    pub fn scaled(&self, scale: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * scale).collect() }
    }

    /// Point value `x(ζ) = Σ c_n √2 sin(nπζ)`.
    pub fn eval(&self, zeta: f64) -> f64 {
        let s = std::f64::consts::SQRT_2;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * s * ((i + 1) as f64 * PI * zeta).sin())
            .sum()
    }

    /// Sup-norm of the profile, evaluated on a uniform grid of `points` nodes.
    pub fn sup_norm(&self, points: usize) -> f64 {
        (0..=points)
            .map(|j| self.eval(j as f64 / points as f64).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for HilbertVector {
    type Error = crate::Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<HilbertVector> for Vec<f64> {
    fn from(v: HilbertVector) -> Self {
        v.coeffs
    }
}

impl Add for &HilbertVector {
    type Output = HilbertVector;
    fn add(self, rhs: Self) -> HilbertVector {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &HilbertVector {
    type Output = HilbertVector;
    fn sub(self, rhs: Self) -> HilbertVector {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Neg for &HilbertVector {
    type Output = HilbertVector;
    fn neg(self) -> HilbertVector {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &HilbertVector {
    type Output = HilbertVector;
    fn mul(self, rhs: f64) -> HilbertVector {
        self.scaled(rhs)
    }
}

// Slice kernels shared with the integrator's inner loops.

#[inline]
pub(crate) fn h_norm_sq(c: &[f64]) -> f64 {
    c.iter().enumerate().map(|(i, x)| eigenvalue(i + 1) * x * x).sum()
}

#[inline]
pub(crate) fn h_inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).enumerate().map(|(i, (x, y))| eigenvalue(i + 1) * x * y).sum()
}

#[inline]
pub(crate) fn h_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| eigenvalue(i + 1) * (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
