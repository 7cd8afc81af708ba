//! Multiplicative noise coefficients `G(x, z)` and their empirical validation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spectral::vector::{h_inner, HilbertVector};

/// Noise coefficient. Every preset is linear in the mark `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficient {
    /// `G(x, z) = z`.
    Additive,
    /// `G(x, z) = ‖x‖ z`.
    NormMultiplicative,
    /// `G(x, z) = ⟨⟨x - v, z⟩⟩ v` with `‖v‖ = 1`.
    RankOne { direction: HilbertVector },
}

impl Coefficient {
    pub fn rank_one(direction: HilbertVector) -> Result<Self> {
        let g = Self::RankOne { direction };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::RankOne { direction } = self {
            let n = direction.h_norm();
            if (n - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("rank-one direction must have unit H-norm, got {n}")));
            }
        }
        Ok(())
    }

    pub fn apply(&self, x: &HilbertVector, z: &HilbertVector) -> HilbertVector {
        let mut out = HilbertVector::zeros(x.modes());
        self.add_into(x.coeffs(), z.coeffs(), 1.0, out.coeffs_mut());
        out
    }

    /// `out += scale * G(x, z)`.
    #[inline]
    pub(crate) fn add_into(&self, x: &[f64], z: &[f64], scale: f64, out: &mut [f64]) {
        match self {
            Self::Additive => {
                for (o, zi) in out.iter_mut().zip(z) {
                    *o += scale * zi;
                }
            }
            Self::NormMultiplicative => {
                let s = scale * crate::spectral::vector::h_norm_sq(x).sqrt();
                for (o, zi) in out.iter_mut().zip(z) {
                    *o += s * zi;
                }
            }
            Self::RankOne { direction } => {
                let v = direction.coeffs();
                let s = scale * (h_inner(x, z) - h_inner(v, z));
                for (o, vi) in out.iter_mut().zip(v) {
                    *o += s * vi;
                }
            }
        }
    }

    /// `c ← c + G(c, scale · z)`.
    #[inline]
    pub(crate) fn jump_in_place(&self, c: &mut [f64], z: &[f64], scale: f64) {
        let (s, dir) = match self {
            Self::Additive => (scale, z),
            Self::NormMultiplicative => (scale * crate::spectral::vector::h_norm_sq(c).sqrt(), z),
            Self::RankOne { direction } => {
                let v = direction.coeffs();
                (scale * (h_inner(c, z) - h_inner(v, z)), v)
            }
        };
        for (ci, di) in c.iter_mut().zip(dir) {
            *ci += s * di;
        }
    }

    /// The jump map `x + G(x, z)`.
    pub fn jump(&self, x: &HilbertVector, z: &HilbertVector) -> HilbertVector {
        let mut out = x.clone();
        self.jump_in_place(out.coeffs_mut(), z.coeffs(), 1.0);
        out
    }

    /// Sharp bound `G_1(y)` in `‖G(y, z)‖ <= G_1(y) ‖z‖`.
    pub fn growth_bound(&self, y: &HilbertVector) -> f64 {
        match self {
            Self::Additive => 1.0,
            Self::NormMultiplicative => y.h_norm(),
            Self::RankOne { direction } => (y - direction).h_norm(),
        }
    }

    /// True when `‖G(x_1, z) - G(x_2, z)‖ / ‖x_1 - x_2‖` grows with `‖z‖`.
    pub fn lipschitz_scales_with_mark(&self) -> bool {
        !matches!(self, Self::Additive)
    }
}

/// Sampled growth profile.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    /// `(upper edge of ‖y‖ bin, sup of ‖G(y,z)‖/‖z‖ in the bin)`.
    pub bins: Vec<(f64, f64)>,
    /// Largest observed ratio `‖G(y,z)‖ / (G_1(y) ‖z‖)`.
    pub max_relative_to_bound: f64,
    /// Largest sampled `|G_1(y) - G_1(y')| / ‖y - y'‖`.
    pub profile_lipschitz: f64,
    pub passed: bool,
}

/// Sampled Lipschitz constant in the state variable over `‖z‖ <= 1`.
#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub k2: f64,
    /// Set when the literal constant is unbounded over all marks.
    pub scales_with_mark: bool,
}

fn random_direction(rng: &mut ChaCha8Rng, modes: usize) -> HilbertVector {
    loop {
        let c: Vec<f64> = (0..modes)
            .map(|i| rng.sample::<f64, _>(StandardNormal) / ((i + 1) as f64 * std::f64::consts::PI))
            .collect();
        let v = HilbertVector::new(c).expect("finite normal samples");
        let n = v.h_norm();
        if n > 1e-12 {
            return v.scaled(1.0 / n);
        }
    }
}

/// Samples `(y, z)` with `‖y‖ <= radius` and unit `z`, and tabulates the
/// growth ratio per radial bin of `y`.
pub fn validate_growth(
    g: &Coefficient,
    modes: usize,
    radius: f64,
    budget: usize,
    seed: u64,
) -> Result<GrowthReport> {
    if budget < 1000 {
        return Err(invalid("growth validation needs at least 1000 samples"));
    }
    const BINS: usize = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bins = vec![0.0f64; BINS];
    let mut max_rel = 0.0f64;
    let mut ys = Vec::with_capacity(budget);
    for _ in 0..budget {
        let r = radius * rng.random::<f64>();
        let y = random_direction(&mut rng, modes).scaled(r);
        let z = random_direction(&mut rng, modes);
        let ratio = g.apply(&y, &z).h_norm();
        let b = ((r / radius) * BINS as f64).min(BINS as f64 - 1.0) as usize;
        bins[b] = bins[b].max(ratio);
        let bound = g.growth_bound(&y);
        if bound > 0.0 {
            max_rel = max_rel.max(ratio / bound);
        } else if ratio > 0.0 {
            max_rel = f64::INFINITY;
        }
        ys.push(y);
    }
    let mut lip = 0.0f64;
    for pair in ys.chunks_exact(2) {
        let d = pair[0].h_distance(&pair[1]);
        if d > 1e-12 {
            lip = lip.max((g.growth_bound(&pair[0]) - g.growth_bound(&pair[1])).abs() / d);
        }
    }
    let bins: Vec<(f64, f64)> =
        bins.into_iter().enumerate().map(|(i, s)| (radius * (i + 1) as f64 / BINS as f64, s)).collect();
    let passed = max_rel.is_finite() && max_rel <= 1.0 + 1e-9 && lip.is_finite() && lip <= 1.0 + 1e-9;
    Ok(GrowthReport { bins, max_relative_to_bound: max_rel, profile_lipschitz: lip, passed })
}

/// Samples pairs of states within `radius` and marks with `‖z‖ <= 1`.
pub fn lipschitz_estimate(
    g: &Coefficient,
    modes: usize,
    radius: f64,
    budget: usize,
    seed: u64,
) -> LipschitzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k2 = 0.0f64;
    for _ in 0..budget {
        let x1 = random_direction(&mut rng, modes).scaled(radius * rng.random::<f64>());
        let x2 = random_direction(&mut rng, modes).scaled(radius * rng.random::<f64>());
        // Aligning one sample of z with x1 - x2 probes the extremal direction.
        let z = if rng.random::<f64>() < 0.5 {
            random_direction(&mut rng, modes)
        } else {
            let d = &x1 - &x2;
            d.scaled(1.0 / d.h_norm().max(1e-300))
        }
        .scaled(rng.random::<f64>());
        let d = x1.h_distance(&x2);
        if d > 1e-12 {
            let diff = &g.apply(&x1, &z) - &g.apply(&x2, &z);
            k2 = k2.max(diff.h_norm() / d);
        }
    }
    LipschitzReport { k2, scales_with_mark: g.lipschitz_scales_with_mark() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rank_one(modes: usize) -> Coefficient {
        Coefficient::rank_one(HilbertVector::unit_mode(modes, 1)).unwrap()
    }

    #[test]
    fn preset_examples() {
        let x = HilbertVector::new(vec![0.3, -0.1, 0.2]).unwrap();
        let z = HilbertVector::new(vec![1.0, 2.0, -0.5]).unwrap();
        assert_eq!(Coefficient::Additive.apply(&x, &z), z);
        let zero = HilbertVector::zeros(3);
        assert_eq!(Coefficient::NormMultiplicative.apply(&zero, &z).h_norm(), 0.0);
        let g = rank_one(3);
        let Coefficient::RankOne { direction } = &g else { unreachable!() };
        assert!(g.apply(direction, &z).h_norm() < 1e-15);
    }

    #[test]
    fn rank_one_displacement_is_along_v() {
        let g = rank_one(3);
        let Coefficient::RankOne { direction: v } = &g else { unreachable!() };
        let x = HilbertVector::new(vec![0.3, -0.1, 0.2]).unwrap();
        let z = HilbertVector::new(vec![1.0, 2.0, -0.5]).unwrap();
        let expected = v.scaled((&x - v).h_inner(&z));
        assert!(g.apply(&x, &z).h_distance(&expected) < 1e-12);
        // At x = 0 with z = r v the displacement has norm r.
        let zero = HilbertVector::zeros(3);
        assert!((g.apply(&zero, &v.scaled(2.5)).h_norm() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_unit_direction() {
        assert!(Coefficient::rank_one(HilbertVector::mode(2, 1, 1.0)).is_err());
    }

    #[test]
    fn growth_profiles() {
        let add = validate_growth(&Coefficient::Additive, 4, 2.0, 2000, 1).unwrap();
        assert!(add.passed);
        assert!(add.bins.iter().all(|(_, s)| (s - 1.0).abs() < 1e-12));
        let mult = validate_growth(&Coefficient::NormMultiplicative, 4, 2.0, 2000, 2).unwrap();
        assert!(mult.passed && (mult.max_relative_to_bound - 1.0).abs() < 1e-12);
        let r1 = validate_growth(&rank_one(4), 4, 2.0, 2000, 3).unwrap();
        assert!(r1.passed && r1.max_relative_to_bound <= 1.0 + 1e-12);
        assert!(validate_growth(&Coefficient::Additive, 4, 1.0, 10, 0).is_err());
    }

    #[test]
    fn lipschitz_constants() {
        assert_eq!(lipschitz_estimate(&Coefficient::Additive, 4, 2.0, 2000, 5).k2, 0.0);
        let m = lipschitz_estimate(&Coefficient::NormMultiplicative, 4, 2.0, 2000, 6);
        assert!(m.k2 <= 1.0 + 1e-12 && m.scales_with_mark);
        let r = lipschitz_estimate(&rank_one(4), 4, 2.0, 2000, 7);
        assert!(r.k2 <= 1.0 + 1e-12 && r.k2 > 0.9);
    }

    proptest! {
        #[test]
        fn homogeneous_in_mark(
            x in proptest::collection::vec(-2.0f64..2.0, 3),
            z in proptest::collection::vec(-2.0f64..2.0, 3),
            c in 0.01f64..100.0,
        ) {
            let x = HilbertVector::new(x).unwrap();
            let z = HilbertVector::new(z).unwrap();
            for g in [Coefficient::Additive, Coefficient::NormMultiplicative, rank_one(3)] {
                let lhs = g.apply(&x, &z.scaled(c));
                let rhs = g.apply(&x, &z).scaled(c);
                prop_assert!(lhs.h_distance(&rhs) <= 1e-10 * (1.0 + rhs.h_norm()));
            }
        }

        #[test]
        fn jump_map_lipschitz(
            x1 in proptest::collection::vec(-1.0f64..1.0, 3),
            x2 in proptest::collection::vec(-1.0f64..1.0, 3),
            z in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let x1 = HilbertVector::new(x1).unwrap();
            let x2 = HilbertVector::new(x2).unwrap();
            let z = HilbertVector::new(z).unwrap();
            let z = if z.h_norm() > 1.0 { z.scaled(1.0 / z.h_norm()) } else { z };
            let d = x1.h_distance(&x2);
            for g in [Coefficient::Additive, Coefficient::NormMultiplicative, rank_one(3)] {
                let lhs = g.jump(&x1, &z).h_distance(&g.jump(&x2, &z));
                prop_assert!(lhs <= 2.0 * d * (1.0 + 1e-12) + 1e-14);
            }
        }
    }
}
