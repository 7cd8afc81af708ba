use std::sync::Arc;

use super::fixed_points::{FixedPoint, Stability};
use super::flow::{probe_directions, LevelSet};
use super::galerkin::{check_blow_up, Galerkin, Workspace, DEFAULT_BLOW_UP_CAP};
use super::vector::{h_distance, h_norm_sq, HilbertVector};
use crate::coefficient::Coefficient;
use crate::error::{invalid, Error, Result};

/// Outcome of basin classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasinVerdict {
    /// Attracted to the stable state with this index.
    Stable(usize),
    /// No stable state was reached before the horizon.
    Separatrix,
}

/// Approximates the domains of attraction of the stable equilibria by
/// integrating the deterministic flow.
#[derive(Debug, Clone)]
pub struct BasinClassifier {
    galerkin: Arc<Galerkin>,
    stable: Vec<HilbertVector>,
    unstable: Vec<HilbertVector>,
    dt: f64,
    horizon: f64,
    tol: f64,
}

impl BasinClassifier {
    pub const DEFAULT_DT: f64 = 1e-2;
    pub const DEFAULT_HORIZON: f64 = 50.0;
    pub const DEFAULT_TOL: f64 = 1e-3;

    pub fn new(galerkin: Arc<Galerkin>, fixed_points: &[FixedPoint]) -> Result<Self> {
        let stable: Vec<_> = fixed_points
            .iter()
            .filter(|p| p.stability == Stability::Stable)
            .map(|p| p.state.clone())
            .collect();
        if stable.is_empty() {
            return Err(Error::NoFixedPoints);
        }
        let unstable = fixed_points
            .iter()
            .filter(|p| p.stability == Stability::Unstable)
            .map(|p| p.state.clone())
            .collect();
        Ok(Self {
            galerkin,
            stable,
            unstable,
            dt: Self::DEFAULT_DT,
            horizon: Self::DEFAULT_HORIZON,
            tol: Self::DEFAULT_TOL,
        })
    }

    pub fn with_resolution(mut self, dt: f64, horizon: f64, tol: f64) -> Result<Self> {
        if !(dt > 0.0 && horizon > 0.0 && tol > 0.0) {
            return Err(invalid("classifier resolution parameters must be positive"));
        }
        self.dt = dt;
        self.horizon = horizon;
        self.tol = tol;
        Ok(self)
    }

    pub fn galerkin(&self) -> &Arc<Galerkin> {
        &self.galerkin
    }

    pub fn stable_states(&self) -> &[HilbertVector] {
        &self.stable
    }

    pub fn stable_state(&self, index: usize) -> Option<&HilbertVector> {
        self.stable.get(index)
    }

    fn nearest(&self, c: &[f64]) -> Option<usize> {
        self.stable.iter().position(|s| h_distance(c, s.coeffs()) < self.tol)
    }

    pub fn classify(&self, x: &HilbertVector) -> Result<BasinVerdict> {
        self.galerkin.check(x)?;
        let mut c = x.coeffs().to_vec();
        if let Some(i) = self.nearest(&c) {
            return Ok(BasinVerdict::Stable(i));
        }
        if self.unstable.iter().any(|u| h_distance(&c, u.coeffs()) < 1e-12) {
            return Ok(BasinVerdict::Separatrix);
        }
        let mut ws = Workspace::new(&self.galerkin);
        let mut t = 0.0;
        while t < self.horizon {
            let before = h_norm_sq(&c);
            self.galerkin.flow_step(&mut c, self.dt, &mut ws);
            t += self.dt;
            check_blow_up(before, &c, DEFAULT_BLOW_UP_CAP, t)?;
            if let Some(i) = self.nearest(&c) {
                return Ok(BasinVerdict::Stable(i));
            }
        }
        Ok(BasinVerdict::Separatrix)
    }
}

/// Geometric part of a domain.
#[derive(Debug, Clone)]
pub enum DomainShape {
    /// H-ball `B_r(center)`.
    Ball { center: HilbertVector, radius: f64 },
    /// Approximate domain of attraction of stable state `index`.
    Basin { classifier: Arc<BasinClassifier>, index: usize, safe_radius: f64 },
    /// The whole space.
    Whole,
}

/// A domain `D`, optionally intersected with a level set `𝒰^r`.
#[derive(Debug, Clone)]
pub struct Domain {
    shape: DomainShape,
    level_set: Option<LevelSet>,
}

/// Reduction level of a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionLevel {
    /// `D ∩ 𝒰^r`.
    One,
    /// Points whose `δ`-ball lies in level one.
    Two,
    /// Level-two points whose `δ`-ball is mapped into level two by every
    /// sampled jump that keeps the centre in `D`.
    Three,
}

impl Domain {
    pub fn ball(center: HilbertVector, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(invalid("ball radius must be positive"));
        }
        Ok(Self { shape: DomainShape::Ball { center, radius }, level_set: None })
    }

    pub fn whole() -> Self {
        Self { shape: DomainShape::Whole, level_set: None }
    }

    /// Basin of stable state `index`, intersected with `level_set` if given.
    /// A safe inner radius around the stable state is measured along probe
    /// rays so that membership near the state is decided without integrating.
    pub fn basin(
        classifier: Arc<BasinClassifier>,
        index: usize,
        level_set: Option<LevelSet>,
    ) -> Result<Self> {
        let phi = classifier
            .stable_state(index)
            .ok_or_else(|| invalid(format!("no stable state with index {index}")))?
            .clone();
        let mut domain = Self {
            shape: DomainShape::Basin { classifier: classifier.clone(), index, safe_radius: 0.0 },
            level_set,
        };
        let n = phi.modes();
        let mut min_cross = f64::INFINITY;
        for dir in probe_directions(n, n.min(6)) {
            min_cross = min_cross.min(domain.ray_crossing(&phi, &dir, 1e-3, 10.0)?);
        }
        if let DomainShape::Basin { safe_radius, .. } = &mut domain.shape {
            *safe_radius = if min_cross.is_finite() { 0.5 * min_cross } else { 5.0 };
        }
        Ok(domain)
    }

    pub fn with_level_set(mut self, level_set: LevelSet) -> Result<Self> {
        if matches!(self.shape, DomainShape::Basin { .. }) {
            return Err(invalid("attach the level set when constructing a basin domain"));
        }
        self.level_set = Some(level_set);
        Ok(self)
    }

    pub fn shape(&self) -> &DomainShape {
        &self.shape
    }

    pub fn level_set(&self) -> Option<&LevelSet> {
        self.level_set.as_ref()
    }

    /// Attached stable state: the centre of a ball or the basin's attractor.
    pub fn anchor(&self) -> Option<&HilbertVector> {
        match &self.shape {
            DomainShape::Ball { center, .. } => Some(center),
            DomainShape::Basin { classifier, index, .. } => classifier.stable_state(*index),
            DomainShape::Whole => None,
        }
    }

    /// Smallest `s` along `anchor + s·dir` that leaves the domain, scanning a
    /// geometric grid and refining by bisection; `∞` beyond `cap`.
    fn ray_crossing(&self, anchor: &HilbertVector, dir: &HilbertVector, start: f64, cap: f64) -> Result<f64> {
        let point = |s: f64| {
            let mut p = anchor.clone();
            p.axpy(s, dir);
            p
        };
        let mut lo = 0.0;
        let mut s = start;
        while s <= cap {
            if !self.contains_exact(&point(s))? {
                let mut hi = s;
                while hi - lo > 1e-3 * hi {
                    let mid = 0.5 * (lo + hi);
                    if self.contains_exact(&point(mid))? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Ok(hi);
            }
            lo = s;
            s *= 1.25;
        }
        Ok(f64::INFINITY)
    }

    fn contains_shape_exact(&self, x: &HilbertVector) -> Result<bool> {
        Ok(match &self.shape {
            DomainShape::Ball { center, radius } => x.h_distance(center) < *radius,
            DomainShape::Basin { classifier, index, .. } => {
                classifier.classify(x)? == BasinVerdict::Stable(*index)
            }
            DomainShape::Whole => true,
        })
    }

    fn contains_exact(&self, x: &HilbertVector) -> Result<bool> {
        if let Some(ls) = &self.level_set {
            if !ls.contains(x) {
                return Ok(false);
            }
        }
        self.contains_shape_exact(x)
    }

    /// Level-one membership `x ∈ D ∩ 𝒰^r`.
    pub fn contains(&self, x: &HilbertVector) -> Result<bool> {
        if let DomainShape::Basin { classifier, index, safe_radius } = &self.shape {
            if let Some(ls) = &self.level_set {
                if !ls.contains(x) {
                    return Ok(false);
                }
            }
            let phi = &classifier.stable[*index];
            if x.h_distance(phi) < *safe_radius {
                return Ok(true);
            }
            return Ok(classifier.classify(x)? == BasinVerdict::Stable(*index));
        }
        self.contains_exact(x)
    }

    /// Exact H-distance from `x` to the complement of level one. Only
    /// available when every constraint is an analytic ball.
    pub fn distance_to_complement(&self, x: &HilbertVector) -> Result<f64> {
        let mut d = match &self.shape {
            DomainShape::Ball { center, radius } => radius - x.h_distance(center),
            DomainShape::Whole => f64::INFINITY,
            DomainShape::Basin { .. } => {
                return Err(Error::Unsupported(
                    "exact distance to the complement of a basin is not computable".into(),
                ))
            }
        };
        if let Some(ls) = &self.level_set {
            match ls.analytic_ball() {
                Some(r) => d = d.min(r - x.h_norm()),
                None => {
                    return Err(Error::Unsupported(
                        "exact distance to the complement of a non-quadratic level set".into(),
                    ))
                }
            }
        }
        Ok(d)
    }

    /// Fail-closed level-two test: `x ± δ p` stays in level one for every
    /// unit probe direction `p`, or the exact distance when it is available.
    fn contains_shrunk(&self, x: &HilbertVector, delta: f64) -> Result<bool> {
        if let Ok(d) = self.distance_to_complement(x) {
            return Ok(d >= delta);
        }
        if !self.contains(x)? {
            return Ok(false);
        }
        if let DomainShape::Basin { classifier, index, safe_radius } = &self.shape {
            let inside_level = self
                .level_set
                .as_ref()
                .is_none_or(|ls| ls.analytic_ball().is_some_and(|r| x.h_norm() + delta <= r));
            if inside_level && x.h_distance(&classifier.stable[*index]) + delta <= *safe_radius {
                return Ok(true);
            }
        }
        for n in 1..=x.modes() {
            let p = HilbertVector::unit_mode(x.modes(), n);
            for s in [delta, -delta] {
                let mut y = x.clone();
                y.axpy(s, &p);
                if !self.contains(&y)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Inward-pointing margin on a ball: the minimum over boundary samples
    /// of the cosine between the inner normal and the vector field. Positive
    /// means the flow enters the ball everywhere on the samples.
    pub fn inward_pointing_margin(&self, galerkin: &Galerkin, samples: usize) -> Result<f64> {
        let DomainShape::Ball { center, radius } = &self.shape else {
            return Err(Error::Unsupported("inward-pointing check is implemented for balls only".into()));
        };
        galerkin.check(center)?;
        let n = center.modes();
        let dirs = probe_directions(n, n.min(6));
        let mut worst = f64::INFINITY;
        for dir in dirs.iter().cycle().take(samples.max(dirs.len())) {
            let mut v = center.clone();
            v.axpy(*radius, dir);
            let field = galerkin.vector_field(&v);
            let norm = field.h_norm();
            if norm == 0.0 {
                return Ok(0.0);
            }
            let inner = -dir.h_inner(&field) / norm;
            worst = worst.min(inner);
        }
        Ok(worst)
    }
}

/// Jump marks used for the sampled level-three reduction.
#[derive(Debug, Clone)]
pub struct JumpCheck {
    pub coefficient: Coefficient,
    /// Marks already scaled by the noise intensity.
    pub marks: Vec<HilbertVector>,
}

/// A reduced domain `D_i(δ, r)`.
#[derive(Debug, Clone)]
pub struct ReducedDomain {
    domain: Domain,
    level: ReductionLevel,
    delta: f64,
    jumps: Option<JumpCheck>,
}

impl ReducedDomain {
    pub fn new(domain: Domain, level: ReductionLevel, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(invalid("reduction radius must be nonnegative"));
        }
        Ok(Self { domain, level, delta, jumps: None })
    }

    pub fn with_jump_check(mut self, jumps: JumpCheck) -> Self {
        self.jumps = Some(jumps);
        self
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn level(&self) -> ReductionLevel {
        self.level
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn at_level(&self, level: ReductionLevel) -> Self {
        Self { level, ..self.clone() }
    }

    pub fn contains(&self, x: &HilbertVector) -> Result<bool> {
        match self.level {
            ReductionLevel::One => self.domain.contains(x),
            ReductionLevel::Two => self.domain.contains_shrunk(x, self.delta),
            ReductionLevel::Three => self.contains_level_three(x),
        }
    }

    fn contains_level_three(&self, x: &HilbertVector) -> Result<bool> {
        let Some(jumps) = &self.jumps else {
            return Err(invalid("level-three membership needs a jump check"));
        };
        if !self.domain.contains_shrunk(x, self.delta)? {
            return Ok(false);
        }
        let mut probes = vec![x.clone()];
        for n in 1..=x.modes() {
            let p = HilbertVector::unit_mode(x.modes(), n);
            for s in [self.delta, -self.delta] {
                let mut y = x.clone();
                y.axpy(s, &p);
                probes.push(y);
            }
        }
        for z in &jumps.marks {
            if !self.domain.contains(&jumps.coefficient.jump(x, z))? {
                continue;
            }
            for v in &probes {
                if !self.domain.contains_shrunk(&jumps.coefficient.jump(v, z), self.delta)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}
