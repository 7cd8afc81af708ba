use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Reaction term `f` of `∂ₜu = Δu + f(u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    /// `f ≡ 0`, the linear heat equation.
    Zero,
    /// `f(r) = Σ_j b_j r^j` with `coeffs[j] = b_j`.
    Polynomial { coeffs: Vec<f64> },
}

impl Nonlinearity {
    /// Chafee-Infante reaction `f(r) = -a (r³ - r)`.
    pub fn chafee_infante(a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(invalid("Chafee-Infante parameter must be positive"));
        }
        let f = Self::Polynomial { coeffs: vec![0.0, a, 0.0, -a] };
        f.validate()?;
        Ok(f)
    }

    /// Dissipativity: odd degree with negative leading coefficient, so that
    /// `limsup f'(r) = -∞` and the growth condition holds.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Zero => Ok(()),
            Self::Polynomial { coeffs } => {
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(invalid("polynomial coefficients must be finite"));
                }
                let deg = self.degree();
                if deg == 0 && coeffs.iter().all(|c| *c == 0.0) {
                    return Ok(());
                }
                let lead = coeffs[deg];
                if deg.is_multiple_of(2) || lead >= 0.0 {
                    return Err(invalid(format!(
                        "polynomial nonlinearity must have odd degree and negative leading \
                         coefficient (degree {deg}, leading {lead})"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Polynomial { coeffs } => coeffs.iter().all(|c| *c == 0.0),
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            Self::Zero => 0,
            Self::Polynomial { coeffs } => coeffs.iter().rposition(|c| *c != 0.0).unwrap_or(0),
        }
    }

    pub fn is_odd(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Polynomial { coeffs } => coeffs.iter().step_by(2).all(|c| *c == 0.0),
        }
    }

    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, b| acc * r + b),
        }
    }

    #[inline]
    pub fn derivative(&self, r: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (j, b)| acc * r + j as f64 * b),
        }
    }

    /// Primitive `F(r) = ∫₀^r f(s) ds`.
    #[inline]
    pub fn primitive(&self, r: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Polynomial { coeffs } => {
                coeffs.iter().enumerate().rev().fold(0.0, |acc, (j, b)| acc * r + b / (j + 1) as f64)
                    * r
            }
        }
    }

    /// `sup_r F(r)`, finite for dissipative polynomials. Used to offset the
    /// potential so that it is nonnegative.
    pub fn primitive_max(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Polynomial { coeffs } => {
                let deg = self.degree();
                if deg == 0 {
                    return 0.0;
                }
                // Cauchy bound on the real roots of f.
                let lead = coeffs[deg].abs();
                let bound = 1.0 + coeffs[..deg].iter().map(|c| c.abs() / lead).fold(0.0, f64::max);
                let n = 4096;
                let mut best = self.primitive(0.0);
                let mut prev = -bound;
                let mut fprev = self.value(prev);
                for k in 1..=n {
                    let r = -bound + 2.0 * bound * k as f64 / n as f64;
                    let fr = self.value(r);
                    // F has a local max where f crosses from + to -.
                    if fprev >= 0.0 && fr <= 0.0 {
                        let root = bisect_root(|s| self.value(s), prev, r);
                        best = best.max(self.primitive(root));
                    }
                    prev = r;
                    fprev = fr;
                }
                best
            }
        }
    }
}

fn bisect_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}
