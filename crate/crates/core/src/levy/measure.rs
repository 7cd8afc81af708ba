use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::HilbertVector;

/// Slowly varying factor `ℓ` of the radial density `r^{-α-1} ℓ(r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlowVariation {
    /// `ℓ ≡ 1`, exactly self-similar.
    #[default]
    Constant,
    /// `ℓ(r) = 1 + ln(1 + r)`.
    Logarithmic,
}

impl SlowVariation {
    #[inline]
    pub fn value(self, r: f64) -> f64 {
        match self {
            Self::Constant => 1.0,
            Self::Logarithmic => 1.0 + r.ln_1p(),
        }
    }
}

/// Angular atom: a unit-H-norm direction carrying weight `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub direction: HilbertVector,
    pub weight: f64,
}

/// Lévy measure `ν(A) = Σ_i w_i ∫₀^∞ 1{r u_i ∈ A} r^{-α-1} ℓ(r) dr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LevyMeasureRepr", into = "LevyMeasureRepr")]
pub struct LevyMeasure {
    alpha: f64,
    atoms: Vec<Atom>,
    slow: SlowVariation,
    total_weight: f64,
}

#[derive(Serialize, Deserialize)]
struct LevyMeasureRepr {
    alpha: f64,
    atoms: Vec<Atom>,
    #[serde(default)]
    slowly_varying: SlowVariation,
}

impl TryFrom<LevyMeasureRepr> for LevyMeasure {
    type Error = Error;
    fn try_from(r: LevyMeasureRepr) -> Result<Self> {
        Self::new(r.alpha, r.atoms, r.slowly_varying)
    }
}

impl From<LevyMeasure> for LevyMeasureRepr {
    fn from(m: LevyMeasure) -> Self {
        Self { alpha: m.alpha, atoms: m.atoms, slowly_varying: m.slow }
    }
}

const SIMPSON_PANELS: usize = 4000;

impl LevyMeasure {
    pub fn new(alpha: f64, atoms: Vec<Atom>, slow: SlowVariation) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(invalid(format!("tail index must lie in (0, 2), got {alpha}")));
        }
        if atoms.is_empty() {
            return Err(invalid("a Lévy measure needs at least one atom"));
        }
        let modes = atoms[0].direction.modes();
        for (i, a) in atoms.iter().enumerate() {
            if !(a.weight > 0.0 && a.weight.is_finite()) {
                return Err(invalid(format!("atom {i} has non-positive weight")));
            }
            if a.direction.modes() != modes {
                return Err(invalid(format!("atom {i} has a different number of modes")));
            }
            if (a.direction.h_norm() - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("atom {i} direction must have unit H-norm")));
            }
        }
        let total_weight = atoms.iter().map(|a| a.weight).sum();
        Ok(Self { alpha, atoms, slow, total_weight })
    }

    /// Atoms `±u` with weight `weight` each for every direction `u`.
    pub fn symmetric(
        alpha: f64,
        directions: &[HilbertVector],
        weight: f64,
        slow: SlowVariation,
    ) -> Result<Self> {
        let atoms = directions
            .iter()
            .flat_map(|u| {
                [
                    Atom { direction: u.clone(), weight },
                    Atom { direction: -u, weight },
                ]
            })
            .collect();
        Self::new(alpha, atoms, slow)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn slow_variation(&self) -> SlowVariation {
        self.slow
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn modes(&self) -> usize {
        self.atoms[0].direction.modes()
    }

    /// Same measure with every weight multiplied by `factor`.
    pub fn scaled_weights(&self, factor: f64) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { direction: a.direction.clone(), weight: a.weight * factor })
            .collect();
        Self::new(self.alpha, atoms, self.slow)
    }

    /// True if every atom has a mirror atom of equal weight.
    pub fn is_symmetric(&self) -> bool {
        self.atoms.iter().all(|a| {
            self.atoms.iter().any(|b| {
                (b.weight - a.weight).abs() <= 1e-12 * a.weight
                    && (&b.direction + &a.direction).h_norm() < 1e-12
            })
        })
    }

    /// `∫_a^b r^{-p} ℓ(r) dr` for `0 <= a < b <= ∞`.
    pub(crate) fn radial_power_integral(&self, p: f64, a: f64, b: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        match self.slow {
            SlowVariation::Constant => {
                let q = 1.0 - p;
                if q.abs() < 1e-15 {
                    return (b / a).ln();
                }
                let pow = |r: f64| {
                    if r.is_infinite() {
                        if q < 0.0 { 0.0 } else { f64::INFINITY }
                    } else if r == 0.0 {
                        if q > 0.0 { 0.0 } else { f64::INFINITY }
                    } else {
                        r.powf(q)
                    }
                };
                (pow(b) - pow(a)) / q
            }
            SlowVariation::Logarithmic => {
                // Substitute r = e^t; the integrand e^{(1-p)t} ℓ(e^t) decays
                // exponentially at whichever end is unbounded.
                let q = 1.0 - p;
                let lo = if a == 0.0 { b.ln() - 48.0 / q } else { a.ln() };
                let hi = if b.is_infinite() { a.ln() + 48.0 / (-q) } else { b.ln() };
                let f = |t: f64| (q * t).exp() * self.slow.value(t.exp());
                simpson(f, lo, hi, SIMPSON_PANELS)
            }
        }
    }

    /// Radial tail `T(s) = ∫_s^∞ r^{-α-1} ℓ(r) dr` of a single unit-weight ray.
    pub fn radial_tail(&self, s: f64) -> f64 {
        match self.slow {
            SlowVariation::Constant => s.powf(-self.alpha) / self.alpha,
            SlowVariation::Logarithmic => self.radial_power_integral(self.alpha + 1.0, s, f64::INFINITY),
        }
    }

    /// `ν(B_s^c(0))`.
    pub fn tail_mass(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(invalid("tail mass needs a positive radius"));
        }
        Ok(self.total_weight * self.radial_tail(s))
    }

    /// Solves `T(s) = target` for `s`.
    pub fn radial_tail_inverse(&self, target: f64) -> f64 {
        match self.slow {
            SlowVariation::Constant => (self.alpha * target).powf(-1.0 / self.alpha),
            SlowVariation::Logarithmic => {
                // T is decreasing; bracket geometrically and bisect in log r.
                let (mut lo, mut hi) = (1.0f64, 1.0f64);
                while self.radial_tail(lo) < target {
                    lo *= 0.5;
                }
                while self.radial_tail(hi) > target {
                    hi *= 2.0;
                }
                while hi - lo > 1e-12 * hi {
                    let mid = (lo * hi).sqrt();
                    if self.radial_tail(mid) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                (lo * hi).sqrt()
            }
        }
    }

    /// Dropped second moment `Σ w_i ∫₀^δ r^{1-α} ℓ(r) dr` of jumps below `δ`.
    pub fn small_second_moment(&self, delta: f64) -> f64 {
        self.total_weight * self.radial_power_integral(self.alpha - 1.0, 0.0, delta)
    }

    /// Largest `δ` whose dropped second moment is at most `tol`.
    pub fn variance_cutoff(&self, tol: f64) -> f64 {
        let a = self.alpha;
        match self.slow {
            SlowVariation::Constant => (tol * (2.0 - a) / self.total_weight).powf(1.0 / (2.0 - a)),
            SlowVariation::Logarithmic => {
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                while self.small_second_moment(hi) < tol {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.small_second_moment(mid) > tol {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo < 1e-14 * hi {
                        break;
                    }
                }
                lo
            }
        }
    }

    /// Regular-variation quotients `ν(rU) / (ν(B_r^c) μ(U))` where `U` is
    /// given by the radial intervals it cuts out of each atom's ray and `μ`
    /// is the limit measure normalised by `μ(B_1^c) = 1`.
    pub fn regular_variation_check(
        &self,
        intervals: &[Vec<(f64, f64)>],
        radii: &[f64],
    ) -> Result<Vec<(f64, f64)>> {
        if intervals.len() != self.atoms.len() {
            return Err(invalid("need one interval list per atom"));
        }
        let a = self.alpha;
        let mu: f64 = self
            .atoms
            .iter()
            .zip(intervals)
            .map(|(atom, iv)| {
                atom.weight
                    * iv.iter()
                        .map(|(lo, hi)| lo.powf(-a) - if hi.is_infinite() { 0.0 } else { hi.powf(-a) })
                        .sum::<f64>()
            })
            .sum::<f64>()
            / self.total_weight;
        if !(mu > 0.0) {
            return Err(invalid("test set has zero limit mass"));
        }
        radii
            .iter()
            .map(|&r| {
                let nu_ru: f64 = self
                    .atoms
                    .iter()
                    .zip(intervals)
                    .map(|(atom, iv)| {
                        atom.weight
                            * iv.iter()
                                .map(|(lo, hi)| self.radial_tail(r * lo) - self.radial_tail(r * hi))
                                .sum::<f64>()
                    })
                    .sum();
                Ok((r, nu_ru / (self.tail_mass(r)? * mu)))
            })
            .collect()
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    s * h / 3.0
}
