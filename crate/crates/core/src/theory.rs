//! Exit rates, limit measures, scale exponents and the metastable generator.
//!
//! Every set is a membership predicate on H. Because the Lévy measure is
//! carried by finitely many rays `r u_i` and every coefficient is linear in
//! the mark, each computation reduces to finding the radial intervals of
//! `{r : φ + G(φ, r u_i) ∈ U}` and integrating the radial density over them.

use serde::{Deserialize, Serialize};

use crate::coefficient::Coefficient;
use crate::error::{invalid, Error, Result};
use crate::levy::LevyMeasure;
use crate::spectral::{probe_directions, HilbertVector};

/// Scale exponents `γ*`, `ρ*`, `θ* = 2αρ*` and the auxiliary exponent `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub alpha: f64,
    pub q: f64,
    pub gamma_star: f64,
    pub rho_star: f64,
    pub theta_star: f64,
}

impl ScaleParams {
    /// Validates the three feasibility inequalities.
    pub fn new(alpha: f64, q: f64, gamma_star: f64, rho_star: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(q >= 1.0) {
            return Err(invalid("need alpha > 0 and q >= 1"));
        }
        let s = Self { alpha, q, gamma_star, rho_star, theta_star: 2.0 * alpha * rho_star };
        s.check()?;
        Ok(s)
    }

    /// Left-hand sides of the three strict inequalities, each of which must
    /// be below its bound: `(2q+3)γ + (1+α)ρ < 1`, `γ < ρ`, `γ/α + 3ρ < 1`.
    pub fn constraint_values(&self) -> [(&'static str, f64, f64); 3] {
        let (g, r, a, q) = (self.gamma_star, self.rho_star, self.alpha, self.q);
        [
            ("(2q+3)*gamma + (1+alpha)*rho < 1", (2.0 * q + 3.0) * g + (1.0 + a) * r, 1.0),
            ("gamma < rho", g, r),
            ("gamma/alpha + 3*rho < 1", g / a + 3.0 * r, 1.0),
        ]
    }

    pub fn check(&self) -> Result<()> {
        let inside = |v: f64| v > 0.0 && v < 1.0;
        if !inside(self.gamma_star) || !inside(self.rho_star) {
            return Err(Error::InfeasibleScales(format!(
                "exponents must lie in (0, 1): gamma = {}, rho = {}",
                self.gamma_star, self.rho_star
            )));
        }
        let violated: Vec<String> = self
            .constraint_values()
            .iter()
            .filter(|(_, lhs, rhs)| !(lhs < rhs))
            .map(|(name, lhs, rhs)| format!("{name} (got {lhs} vs {rhs})"))
            .collect();
        if violated.is_empty() {
            Ok(())
        } else {
            Err(Error::InfeasibleScales(violated.join("; ")))
        }
    }

    /// `γ_ε = ε^{γ*}`.
    pub fn gamma_eps(&self, eps: f64) -> f64 {
        eps.powf(self.gamma_star)
    }

    /// Large-jump threshold `ρ^ε = ε^{-ρ*}` on unscaled marks.
    pub fn rho_eps(&self, eps: f64) -> f64 {
        eps.powf(-self.rho_star)
    }
}

/// Default safety margin for [`choose_scales`].
pub const DEFAULT_MARGIN: f64 = 0.8;

/// `ρ* = m/(3 + 1/min(α,1))` and `γ* = min(ρ*/4, (1 - (1+α)ρ*)/(2(2q+3)))`.
pub fn choose_scales(alpha: f64, q: f64, margin: f64) -> Result<ScaleParams> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::InfeasibleScales(format!(
            "safety margin must lie in (0, 1), got {margin}"
        )));
    }
    if !(alpha > 0.0) || !(q >= 1.0) {
        return Err(invalid("need alpha > 0 and q >= 1"));
    }
    let rho = margin / (3.0 + 1.0 / alpha.min(1.0));
    let gamma = (rho / 4.0).min((1.0 - (1.0 + alpha) * rho) / (2.0 * (2.0 * q + 3.0)));
    ScaleParams::new(alpha, q, gamma, rho)
}

/// Resolution of the ray interval decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RayOptions {
    /// Smallest probed displacement `‖G(φ, r u)‖`.
    pub s_min: f64,
    /// Largest probed displacement; membership is taken as constant beyond.
    pub s_max: f64,
    pub points_per_decade: usize,
    /// Relative bisection tolerance on interval endpoints.
    pub rel_tol: f64,
    /// Maximum number of membership changes per ray.
    pub budget: usize,
}

impl Default for RayOptions {
    fn default() -> Self {
        Self { s_min: 1e-4, s_max: 1e4, points_per_decade: 60, rel_tol: 1e-10, budget: 64 }
    }
}

/// Radial intervals (in mark radius) cut out of each atom's ray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayProfile {
    pub intervals: Vec<Vec<(f64, f64)>>,
}

/// Interval decomposition of `{r > 0 : φ + G(φ, r u_i) ∈ U}` for every atom.
pub fn ray_profile<F>(
    measure: &LevyMeasure,
    coefficient: &Coefficient,
    phi: &HilbertVector,
    mut in_set: F,
    opts: &RayOptions,
) -> Result<RayProfile>
where
    F: FnMut(&HilbertVector) -> Result<bool>,
{
    let mut out = Vec::with_capacity(measure.atoms().len());
    for (ray, atom) in measure.atoms().iter().enumerate() {
        let dir = coefficient.apply(phi, &atom.direction);
        let speed = dir.h_norm();
        if speed == 0.0 {
            if in_set(phi)? {
                return Err(invalid(format!("set contains the anchor along degenerate ray {ray}")));
            }
            out.push(Vec::new());
            continue;
        }
        let point = |s: f64| {
            let mut x = phi.clone();
            x.axpy(s / speed, &dir);
            x
        };
        let decades = (opts.s_max / opts.s_min).log10();
        let n = (decades * opts.points_per_decade as f64).ceil() as usize;
        let grid: Vec<f64> =
            (0..=n).map(|k| opts.s_min * (opts.s_max / opts.s_min).powf(k as f64 / n as f64)).collect();
        let mut prev = in_set(&point(grid[0]))?;
        if prev {
            return Err(invalid(format!(
                "set is not bounded away from the anchor along ray {ray}"
            )));
        }
        let mut edges = Vec::new();
        for w in grid.windows(2) {
            let cur = in_set(&point(w[1]))?;
            if cur != prev {
                let (mut lo, mut hi) = (w[0], w[1]);
                while hi - lo > opts.rel_tol * hi {
                    let mid = 0.5 * (lo + hi);
                    if in_set(&point(mid))? == prev {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                edges.push(0.5 * (lo + hi));
                if edges.len() > opts.budget {
                    return Err(Error::Oscillatory { ray, changes: edges.len(), budget: opts.budget });
                }
                prev = cur;
            }
        }
        if prev {
            edges.push(f64::INFINITY);
        }
        out.push(edges.chunks_exact(2).map(|c| (c[0] / speed, c[1] / speed)).collect());
    }
    Ok(RayProfile { intervals: out })
}

fn intersect_intervals(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &(a0, a1) in a {
        for &(b0, b1) in b {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if hi > lo {
                out.push((lo, hi));
            }
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

impl RayProfile {
    pub fn intersect(&self, other: &Self) -> Self {
        Self {
            intervals: self
                .intervals
                .iter()
                .zip(&other.intervals)
                .map(|(a, b)| intersect_intervals(a, b))
                .collect(),
        }
    }

    pub fn union_disjoint(&self, other: &Self) -> Self {
        Self {
            intervals: self
                .intervals
                .iter()
                .zip(&other.intervals)
                .map(|(a, b)| {
                    let mut v: Vec<_> = a.iter().chain(b).copied().collect();
                    v.sort_by(|x, y| x.0.total_cmp(&y.0));
                    v
                })
                .collect(),
        }
    }

    /// Smallest radius entering the set along each ray (`∞` if none).
    pub fn crossing_radii(&self) -> Vec<f64> {
        self.intervals.iter().map(|iv| iv.first().map_or(f64::INFINITY, |p| p.0)).collect()
    }

    /// Limit measure `m(U) = Σ w_i ∫ r^{-α-1} dr` over the intervals.
    pub fn limit_mass(&self, measure: &LevyMeasure) -> f64 {
        let a = measure.alpha();
        let pow = |r: f64| if r.is_infinite() { 0.0 } else { r.powf(-a) };
        measure
            .atoms()
            .iter()
            .zip(&self.intervals)
            .map(|(atom, iv)| atom.weight * iv.iter().map(|(lo, hi)| (pow(*lo) - pow(*hi)) / a).sum::<f64>())
            .sum()
    }

    /// `ν(ε^{-1} 𝒥)`: the rate of marks `W` with `εW` in the jump set.
    pub fn rate(&self, measure: &LevyMeasure, eps: f64) -> f64 {
        measure
            .atoms()
            .iter()
            .zip(&self.intervals)
            .map(|(atom, iv)| {
                atom.weight
                    * iv.iter()
                        .map(|(lo, hi)| {
                            let t_hi = if hi.is_infinite() { 0.0 } else { measure.radial_tail(hi / eps) };
                            measure.radial_tail(lo / eps) - t_hi
                        })
                        .sum::<f64>()
            })
            .sum()
    }
}

/// First radius at which `φ + G(φ, r u)` leaves `D`, or `∞`.
pub fn crossing_radius<F>(
    coefficient: &Coefficient,
    phi: &HilbertVector,
    direction: &HilbertVector,
    in_domain: F,
    opts: &RayOptions,
) -> Result<f64>
where
    F: FnMut(&HilbertVector) -> Result<bool>,
{
    let single = LevyMeasure::new(
        1.0,
        vec![crate::levy::Atom { direction: direction.clone(), weight: 1.0 }],
        Default::default(),
    )?;
    let mut in_domain = in_domain;
    let profile = ray_profile(&single, coefficient, phi, |x| Ok(!in_domain(x)?), opts)?;
    Ok(profile.crossing_radii()[0])
}

/// Exit geometry of a domain seen from its stable state: the rays' exit
/// intervals, from which `λ_ε` follows for every `ε`.
#[derive(Debug, Clone)]
pub struct ExitGeometry {
    pub exit: RayProfile,
}

impl ExitGeometry {
    pub fn new<F>(
        measure: &LevyMeasure,
        coefficient: &Coefficient,
        phi: &HilbertVector,
        mut in_domain: F,
        opts: &RayOptions,
    ) -> Result<Self>
    where
        F: FnMut(&HilbertVector) -> Result<bool>,
    {
        let exit = ray_profile(measure, coefficient, phi, |x| Ok(!in_domain(x)?), opts)?;
        Ok(Self { exit })
    }

    /// `λ_ε`. Zero means no large jump from the stable state leaves `D`.
    pub fn lambda(&self, measure: &LevyMeasure, eps: f64) -> f64 {
        self.exit.rate(measure, eps)
    }

    /// `m((D)^c)`.
    pub fn exit_mass(&self, measure: &LevyMeasure) -> f64 {
        self.exit.limit_mass(measure)
    }
}

/// Fails when `U` has positive limit mass on its boundary.
///
/// The boundary is fattened to the set of ray points whose membership flips
/// under a perturbation of H-size `η = 1e-8` along some unit mode. Returns
/// the fattened boundary's share of the set's limit mass, which must be
/// negligible.
pub fn check_boundary_mass<F>(
    measure: &LevyMeasure,
    coefficient: &Coefficient,
    phi: &HilbertVector,
    mut in_set: F,
    opts: &RayOptions,
) -> Result<f64>
where
    F: FnMut(&HilbertVector) -> Result<bool>,
{
    let eta = 1e-8;
    let probes = probe_directions(phi.modes(), 0);
    let a = measure.alpha();
    let decades = (opts.s_max / opts.s_min).log10();
    let n = (decades * opts.points_per_decade as f64).ceil() as usize;
    let mut ambiguous = 0.0;
    let mut inside = 0.0;
    for atom in measure.atoms() {
        let dir = coefficient.apply(phi, &atom.direction);
        let speed = dir.h_norm();
        if speed == 0.0 {
            continue;
        }
        for k in 0..n {
            let s0 = opts.s_min * (opts.s_max / opts.s_min).powf(k as f64 / n as f64);
            let s1 = opts.s_min * (opts.s_max / opts.s_min).powf((k + 1) as f64 / n as f64);
            let mid = (s0 * s1).sqrt();
            let mass = atom.weight * ((s0 / speed).powf(-a) - (s1 / speed).powf(-a)) / a;
            let mut x = phi.clone();
            x.axpy(mid / speed, &dir);
            let base = in_set(&x)?;
            let mut flips = false;
            for p in &probes {
                let mut y = x.clone();
                y.axpy(eta, p);
                if in_set(&y)? != base {
                    flips = true;
                    break;
                }
            }
            if flips {
                ambiguous += mass;
            }
            if flips || base {
                inside += mass;
            }
        }
    }
    let frac = if inside > 0.0 { ambiguous / inside } else { 0.0 };
    if frac > 1e-6 {
        return Err(Error::BoundaryMass(format!(
            "a fraction {frac:.3e} of the set's ray mass sits within {eta:e} of its boundary"
        )));
    }
    Ok(frac)
}

/// Generator of the limiting Markov chain on the stable states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMatrix {
    pub entries: Vec<Vec<f64>>,
}

impl GeneratorMatrix {
    pub const ROW_SUM_TOL: f64 = 1e-6;

    /// `rows[ι][κ] = m^ι(D^κ)` for `κ ≠ ι`, and `exit[ι] = m^ι((D^ι)^c)`.
    pub fn from_masses(off_diagonal: Vec<Vec<f64>>, exit: &[f64]) -> Result<Self> {
        let n = exit.len();
        if n < 2 || off_diagonal.len() != n {
            return Err(invalid("a generator needs at least two states"));
        }
        let mut entries = off_diagonal;
        for (i, row) in entries.iter_mut().enumerate() {
            if row.len() != n {
                return Err(invalid("generator rows must be square"));
            }
            row[i] = -exit[i];
            let sum: f64 = row.iter().sum();
            if sum.abs() > Self::ROW_SUM_TOL * exit[i].abs().max(1e-300) {
                return Err(Error::RowSum { row: i, sum });
            }
        }
        Ok(Self { entries })
    }

    pub fn states(&self) -> usize {
        self.entries.len()
    }

    /// Stationary distribution (two-state closed form, power iteration otherwise).
    pub fn stationary(&self) -> Vec<f64> {
        let n = self.states();
        if n == 2 {
            let (a, b) = (self.entries[0][1], self.entries[1][0]);
            return vec![b / (a + b), a / (a + b)];
        }
        let scale = self.entries.iter().enumerate().map(|(i, r)| -r[i]).fold(0.0, f64::max);
        let mut p = vec![1.0 / n as f64; n];
        for _ in 0..100_000 {
            let mut next = p.clone();
            for (i, pi) in p.iter().enumerate() {
                for (j, q) in self.entries[i].iter().enumerate() {
                    next[j] += pi * q / scale;
                }
            }
            p = next;
        }
        p
    }
}

/// `𝒢` for stable states `phis`, where `basin(x)` returns the index of the
/// basin containing `x` (or `None` off every basin).
pub fn generator_matrix<F>(
    measure: &LevyMeasure,
    coefficient: &Coefficient,
    phis: &[HilbertVector],
    basin: F,
    opts: &RayOptions,
) -> Result<GeneratorMatrix>
where
    F: Fn(&HilbertVector) -> Result<Option<usize>>,
{
    let n = phis.len();
    if n < 2 {
        return Err(invalid("the generator needs at least two stable states"));
    }
    let mut off = vec![vec![0.0; n]; n];
    let mut exit = vec![0.0; n];
    for (i, phi) in phis.iter().enumerate() {
        exit[i] = ray_profile(measure, coefficient, phi, |x| Ok(basin(x)? != Some(i)), opts)?
            .limit_mass(measure);
        for k in (0..n).filter(|k| *k != i) {
            off[i][k] = ray_profile(measure, coefficient, phi, |x| Ok(basin(x)? == Some(k)), opts)?
                .limit_mass(measure);
        }
    }
    GeneratorMatrix::from_masses(off, &exit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::SlowVariation;
    use proptest::prelude::*;

    fn unit_ball(x: &HilbertVector) -> Result<bool> {
        Ok(x.h_norm() < 1.0)
    }

    fn oracle(modes: usize) -> LevyMeasure {
        LevyMeasure::symmetric(1.5, &[HilbertVector::unit_mode(modes, 1)], 0.5, SlowVariation::Constant)
            .unwrap()
    }

    #[test]
    fn scale_examples() {
        let s = choose_scales(1.5, 1.0, DEFAULT_MARGIN).unwrap();
        assert!((s.rho_star - 0.2).abs() < 1e-15);
        assert!((s.gamma_star - 0.05).abs() < 1e-15);
        assert!((s.theta_star - 0.6).abs() < 1e-15);
        let c = s.constraint_values();
        assert!((c[0].1 - 0.75).abs() < 1e-12);
        assert!((c[2].1 - (0.05 / 1.5 + 0.6)).abs() < 1e-12);
        let low = ScaleParams::new(0.5, 1.0, 0.04, 0.15).unwrap();
        assert!((low.theta_star - 0.15).abs() < 1e-15);
        let c = low.constraint_values();
        assert!((c[0].1 - 0.425).abs() < 1e-12 && (c[2].1 - 0.53).abs() < 1e-12);
        assert!(matches!(choose_scales(1.5, 1.0, 1.5), Err(Error::InfeasibleScales(_))));
        assert!(ScaleParams::new(1.5, 1.0, 0.3, 0.2).is_err());
    }

    #[test]
    fn additive_unit_ball_rate() {
        let m = oracle(1);
        let phi = HilbertVector::zeros(1);
        let geo = ExitGeometry::new(&m, &Coefficient::Additive, &phi, unit_ball, &RayOptions::default())
            .unwrap();
        let eps = 0.1f64;
        let lambda = geo.lambda(&m, eps);
        assert!((lambda - eps.powf(1.5) / 1.5).abs() < 1e-9 * lambda);
        assert!((lambda - 0.021_081_851).abs() < 1e-8);
        assert!((geo.exit_mass(&m) - 2.0 / 3.0).abs() < 1e-9);
        for r in geo.exit.crossing_radii() {
            assert!((r - 1.0).abs() < 1e-9);
        }
        for e in [0.3, 0.05, 0.001] {
            assert!((geo.lambda(&m, e) / e.powf(1.5) - 1.0 / 1.5).abs() < 1e-9);
        }
    }

    #[test]
    fn whole_space_has_zero_rate() {
        let m = oracle(2);
        let geo = ExitGeometry::new(
            &m,
            &Coefficient::Additive,
            &HilbertVector::zeros(2),
            |_| Ok(true),
            &RayOptions::default(),
        )
        .unwrap();
        assert_eq!(geo.lambda(&m, 0.1), 0.0);
    }

    #[test]
    fn crossing_radius_examples() {
        let opts = RayOptions::default();
        let v = HilbertVector::unit_mode(3, 2);
        let zero = HilbertVector::zeros(3);
        let r = crossing_radius(&Coefficient::rank_one(v.clone()).unwrap(), &zero, &v, unit_ball, &opts)
            .unwrap();
        assert!((r - 1.0).abs() < 1e-9);
        let phi = HilbertVector::mode(3, 1, 0.4);
        let big = 0.7;
        let ball = |x: &HilbertVector| Ok(x.h_distance(&phi) < big);
        let r = crossing_radius(&Coefficient::NormMultiplicative, &phi, &v, ball, &opts).unwrap();
        assert!((r - big / phi.h_norm()).abs() < 1e-9 * r);
        let none = crossing_radius(&Coefficient::Additive, &zero, &v, |_| Ok(true), &opts).unwrap();
        assert!(none.is_infinite());
    }

    #[test]
    fn rank_one_locus_mass() {
        let v = HilbertVector::unit_mode(4, 1);
        let m = LevyMeasure::symmetric(1.5, std::slice::from_ref(&v), 0.5, SlowVariation::Constant).unwrap();
        let g = Coefficient::rank_one(v.clone()).unwrap();
        let zero = HilbertVector::zeros(4);
        let opts = RayOptions::default();
        let geo = ExitGeometry::new(&m, &g, &zero, unit_ball, &opts).unwrap();
        // Both rays leave at radius one: m(D^c) = 2 · ½ · 1/α.
        assert!((geo.exit_mass(&m) - 2.0 / 3.0).abs() < 1e-9);
        let half = |x: &HilbertVector| Ok(x.h_inner(&v) > 1.0);
        let u = ray_profile(&m, &g, &zero, half, &opts).unwrap();
        let ratio = u.intersect(&geo.exit).limit_mass(&m) / geo.exit_mass(&m);
        assert!((ratio - 0.5).abs() < 1e-9);
        assert_eq!(check_boundary_mass(&m, &g, &zero, half, &opts).unwrap(), 0.0);
    }

    #[test]
    fn boundary_mass_is_detected() {
        // A hyperplane containing the ray carries all of its mass.
        let m = oracle(2);
        let e2 = HilbertVector::unit_mode(2, 2);
        let plane = |x: &HilbertVector| Ok(x.h_norm() > 1.0 && x.h_inner(&e2) >= 0.0);
        let err = check_boundary_mass(&m, &Coefficient::Additive, &HilbertVector::zeros(2), plane, &RayOptions::default());
        assert!(matches!(err, Err(Error::BoundaryMass(_))));
    }

    #[test]
    fn degenerate_and_unbounded_sets() {
        let m = oracle(2);
        let zero = HilbertVector::zeros(2);
        let opts = RayOptions::default();
        let p = ray_profile(&m, &Coefficient::Additive, &zero, |x| Ok(x.h_norm() > 50.0 && x.coeffs()[1] > 0.0), &opts)
            .unwrap();
        assert_eq!(p.limit_mass(&m), 0.0);
        assert!(ray_profile(&m, &Coefficient::Additive, &zero, |_| Ok(true), &opts).is_err());
        let wiggly = |x: &HilbertVector| Ok((x.h_norm() * 100.0).sin() > 0.0 && x.h_norm() > 0.1);
        assert!(matches!(
            ray_profile(&m, &Coefficient::Additive, &zero, wiggly, &opts),
            Err(Error::Oscillatory { .. })
        ));
    }

    #[test]
    fn generator_symmetry_and_weight_linearity() {
        let u = HilbertVector::unit_mode(1, 1);
        let m = LevyMeasure::symmetric(1.5, &[u], 0.5, SlowVariation::Constant).unwrap();
        let phis = [HilbertVector::mode(1, 1, 0.5), HilbertVector::mode(1, 1, -0.5)];
        let basin = |x: &HilbertVector| Ok(Some(if x.coeffs()[0] > 0.0 { 0 } else { 1 }));
        let opts = RayOptions::default();
        let g = generator_matrix(&m, &Coefficient::Additive, &phis, basin, &opts).unwrap();
        assert!((g.entries[0][1] - g.entries[1][0]).abs() < 1e-9);
        assert!(g.entries[0][1] > 0.0);
        for row in &g.entries {
            assert!(row.iter().sum::<f64>().abs() < 1e-9);
        }
        let st = g.stationary();
        assert!((st[0] - 0.5).abs() < 1e-9);
        let m2 = m.scaled_weights(2.0).unwrap();
        let g2 = generator_matrix(&m2, &Coefficient::Additive, &phis, basin, &opts).unwrap();
        assert!((g2.entries[0][1] - 2.0 * g.entries[0][1]).abs() < 1e-9);
        let lost = |x: &HilbertVector| {
            let c = x.coeffs()[0];
            Ok(if c > 0.0 { Some(0) } else if c > -2.0 { Some(1) } else { None })
        };
        assert!(matches!(
            generator_matrix(&m, &Coefficient::Additive, &phis, lost, &opts),
            Err(Error::RowSum { .. })
        ));
    }

    proptest! {
        #[test]
        fn choose_scales_is_always_feasible(alpha in 0.05f64..1.99, q in 1.0f64..10.0, margin in 0.05f64..0.99) {
            let s = choose_scales(alpha, q, margin).unwrap();
            prop_assert!(s.check().is_ok());
        }

        #[test]
        fn lambda_is_monotone_in_domain(r1 in 0.2f64..3.0, dr in 0.0f64..3.0, eps in 0.001f64..0.5) {
            let m = oracle(2);
            let zero = HilbertVector::zeros(2);
            let opts = RayOptions { points_per_decade: 10, ..Default::default() };
            let small = ExitGeometry::new(&m, &Coefficient::Additive, &zero, |x| Ok(x.h_norm() < r1), &opts).unwrap();
            let large = ExitGeometry::new(&m, &Coefficient::Additive, &zero, |x| Ok(x.h_norm() < r1 + dr), &opts).unwrap();
            prop_assert!(small.lambda(&m, eps) >= large.lambda(&m, eps) * (1.0 - 1e-9));
        }

        #[test]
        fn limit_mass_is_additive(a in 0.1f64..2.0, b in 0.1f64..2.0, c in 0.1f64..2.0) {
            let m = oracle(1);
            let zero = HilbertVector::zeros(1);
            let opts = RayOptions { points_per_decade: 100, ..Default::default() };
            let (lo, mid, hi) = (a, a + b, a + b + c);
            let p1 = ray_profile(&m, &Coefficient::Additive, &zero, |x| { let n = x.h_norm(); Ok(n > lo && n <= mid) }, &opts).unwrap();
            let p2 = ray_profile(&m, &Coefficient::Additive, &zero, |x| { let n = x.h_norm(); Ok(n > mid && n <= hi) }, &opts).unwrap();
            let p = ray_profile(&m, &Coefficient::Additive, &zero, |x| { let n = x.h_norm(); Ok(n > lo && n <= hi) }, &opts).unwrap();
            let sum = p1.limit_mass(&m) + p2.limit_mass(&m);
            prop_assert!((sum - p.limit_mass(&m)).abs() < 1e-9 * p.limit_mass(&m));
            prop_assert!((p1.union_disjoint(&p2).limit_mass(&m) - sum).abs() < 1e-12);
        }
    }
}
