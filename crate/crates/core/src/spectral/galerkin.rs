use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;

use super::nonlinearity::Nonlinearity;
use super::vector::{eigenvalue, h_norm_sq, HilbertVector};
use crate::error::{invalid, Error, Result};

/// Default H-norm above which the integrator reports divergence.
pub const DEFAULT_BLOW_UP_CAP: f64 = 1.0e3;

/// Largest fraction of `1 / max|f'|` used as an explicit nonlinear substep.
const STIFFNESS_FRACTION: f64 = 0.5;

/// Sine-mode Galerkin discretisation of `∂ₜu = Δu + f(u)` on (0,1).
///
/// The reaction term is evaluated by collocation on the interior nodes
/// `ζ_j = j/M` and projected back with the trapezoidal rule, which is exact
/// for the trigonometric polynomials produced by a polynomial `f` as long as
/// `M > (deg f + 1) N / 2`.
#[derive(Debug, Clone)]
pub struct Galerkin {
    modes: usize,
    grid: usize,
    nonlinearity: Nonlinearity,
    eigen: Vec<f64>,
    // sine[j * modes + n] = √2 sin((n+1)π ζ_{j+1})
    sine: Vec<f64>,
}

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub(crate) values: Vec<f64>,
    pub(crate) forcing: Vec<f64>,
}

impl Workspace {
    pub fn new(g: &Galerkin) -> Self {
        Self { values: vec![0.0; g.grid - 1], forcing: vec![0.0; g.modes] }
    }
}

impl Galerkin {
    pub fn new(modes: usize, nonlinearity: Nonlinearity) -> Result<Self> {
        if modes == 0 {
            return Err(invalid("Galerkin dimension must be positive"));
        }
        nonlinearity.validate()?;
        let deg = nonlinearity.degree().max(1);
        let grid = (4 * modes).max((deg + 1) * modes / 2 + 1);
        let mut sine = Vec::with_capacity((grid - 1) * modes);
        for j in 1..grid {
            let zeta = j as f64 / grid as f64;
            for n in 1..=modes {
                sine.push(SQRT_2 * (n as f64 * PI * zeta).sin());
            }
        }
        Ok(Self {
            modes,
            grid,
            eigen: (1..=modes).map(eigenvalue).collect(),
            nonlinearity,
            sine,
        })
    }

    #[inline]
    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Number of collocation intervals `M`.
    pub fn grid_intervals(&self) -> usize {
        self.grid
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen
    }

    pub fn zeros(&self) -> HilbertVector {
        HilbertVector::zeros(self.modes)
    }

    pub(crate) fn check(&self, x: &HilbertVector) -> Result<()> {
        if x.modes() != self.modes {
            return Err(invalid(format!(
                "vector has {} modes, discretisation has {}",
                x.modes(),
                self.modes
            )));
        }
        Ok(())
    }

    /// Profile values at the interior collocation nodes.
    pub(crate) fn to_grid(&self, c: &[f64], out: &mut [f64]) {
        for (row, o) in self.sine.chunks_exact(self.modes).zip(out.iter_mut()) {
            *o = row.iter().zip(c).map(|(s, ci)| s * ci).sum();
        }
    }

    /// Trapezoidal L² projection of nodal values onto the sine modes.
    pub(crate) fn project(&self, values: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (row, v) in self.sine.chunks_exact(self.modes).zip(values) {
            for (o, s) in out.iter_mut().zip(row) {
                *o += s * v;
            }
        }
        let w = 1.0 / self.grid as f64;
        out.iter_mut().for_each(|o| *o *= w);
    }

    /// Writes the Galerkin projection of `f(u)` into `out` and returns
    /// `max_j |f'(u(ζ_j))|`, the explicit stiffness of the reaction term.
    pub(crate) fn reaction(&self, c: &[f64], ws_values: &mut [f64], out: &mut [f64]) -> f64 {
        if self.nonlinearity.is_zero() {
            out.iter_mut().for_each(|o| *o = 0.0);
            return 0.0;
        }
        self.to_grid(c, ws_values);
        let mut stiff = 0.0f64;
        for v in ws_values.iter_mut() {
            stiff = stiff.max(self.nonlinearity.derivative(*v).abs());
            *v = self.nonlinearity.value(*v);
        }
        self.project(ws_values, out);
        stiff
    }

    /// Galerkin vector field `Δx + P f(x)` in coefficient space.
    pub fn vector_field(&self, x: &HilbertVector) -> HilbertVector {
        let mut ws = Workspace::new(self);
        let mut out = vec![0.0; self.modes];
        self.reaction(x.coeffs(), &mut ws.values, &mut out);
        for (o, (l, c)) in out.iter_mut().zip(self.eigen.iter().zip(x.coeffs())) {
            *o -= l * c;
        }
        HilbertVector::new(out).expect("finite vector field")
    }

    /// Jacobian of the Galerkin vector field at `x`.
    pub fn jacobian(&self, x: &HilbertVector) -> DMatrix<f64> {
        let n = self.modes;
        let mut jac = DMatrix::<f64>::zeros(n, n);
        if !self.nonlinearity.is_zero() {
            let mut u = vec![0.0; self.grid - 1];
            self.to_grid(x.coeffs(), &mut u);
            let w = 1.0 / self.grid as f64;
            for (row, uj) in self.sine.chunks_exact(n).zip(&u) {
                let d = self.nonlinearity.derivative(*uj) * w;
                for a in 0..n {
                    for b in 0..n {
                        jac[(a, b)] += d * row[a] * row[b];
                    }
                }
            }
        }
        for a in 0..n {
            jac[(a, a)] -= self.eigen[a];
        }
        jac
    }

    /// `½‖x‖² - ∫ F(x(ζ)) dζ`, the gradient-flow energy without offset.
    pub fn potential_raw(&self, x: &HilbertVector) -> f64 {
        let kinetic = 0.5 * h_norm_sq(x.coeffs());
        if self.nonlinearity.is_zero() {
            return kinetic;
        }
        let mut u = vec![0.0; self.grid - 1];
        self.to_grid(x.coeffs(), &mut u);
        let reaction: f64 = u.iter().map(|v| self.nonlinearity.primitive(*v)).sum::<f64>()
            / self.grid as f64;
        kinetic - reaction
    }

    /// Nonnegative Lyapunov functional `∫ ½(∇x)² - F(x) + sup F`.
    pub fn potential(&self, x: &HilbertVector) -> f64 {
        self.potential_raw(x) + self.nonlinearity.primitive_max()
    }

    /// Exact solution over `h` of `ċ = -Λc + forcing` with frozen forcing.
    #[inline]
    pub(crate) fn propagate(&self, c: &mut [f64], forcing: &[f64], h: f64) {
        for ((ci, fi), l) in c.iter_mut().zip(forcing).zip(&self.eigen) {
            let em1 = (-l * h).exp_m1();
            *ci = (1.0 + em1) * *ci - em1 / l * fi;
        }
    }

    /// Exact heat semigroup over `h`.
    #[inline]
    pub(crate) fn semigroup(&self, c: &mut [f64], h: f64) {
        for (ci, l) in c.iter_mut().zip(&self.eigen) {
            *ci *= (-l * h).exp();
        }
    }

    /// One exponential-Euler step of length `h`, split into substeps whenever
    /// `h · max|f'|` would make the explicit reaction update unstable.
    pub(crate) fn flow_step(&self, c: &mut [f64], h: f64, ws: &mut Workspace) {
        let mut remaining = h;
        while remaining > 0.0 {
            let stiff = self.reaction(c, &mut ws.values, &mut ws.forcing);
            let sub = if stiff * remaining > STIFFNESS_FRACTION {
                STIFFNESS_FRACTION / stiff
            } else {
                remaining
            };
            self.propagate(c, &ws.forcing, sub);
            remaining -= sub;
            if remaining < 1e-15 * h {
                break;
            }
        }
    }
}

/// Divergence guard: the state left the cap and is still growing.
pub(crate) fn check_blow_up(before_sq: f64, c: &[f64], cap: f64, time: f64) -> Result<()> {
    let after = h_norm_sq(c);
    if !after.is_finite() || (after > cap * cap && after > before_sq) {
        return Err(Error::Divergence { norm: after.sqrt(), cap, time });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ci(modes: usize) -> Galerkin {
        Galerkin::new(modes, Nonlinearity::chafee_infante(2.0 * PI * PI).unwrap()).unwrap()
    }

    #[test]
    fn projection_inverts_synthesis() {
        let g = ci(5);
        let c = [0.3, -1.0, 0.25, 0.0, 2.0];
        let mut u = vec![0.0; g.grid_intervals() - 1];
        let mut back = [0.0; 5];
        g.to_grid(&c, &mut u);
        g.project(&u, &mut back);
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn single_mode_cubic_projection() {
        // ⟨(c e_1)³, e_1⟩ = (3/2) c³ for e_1 = √2 sin(πζ).
        let g = ci(1);
        let a = 2.0 * PI * PI;
        let c = 0.7;
        let mut ws = Workspace::new(&g);
        let mut out = [0.0];
        g.reaction(&[c], &mut ws.values, &mut out);
        let expected = a * c - a * 1.5 * c * c * c;
        assert!((out[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn single_mode_potential_closed_form() {
        // ∫ sin² = 1/2 and ∫ sin⁴ = 3/8 give
        // V_raw(c e_1) = ½π²c² + a(3c⁴/8 − c²/2).
        let g = ci(1);
        let a = 2.0 * PI * PI;
        for c in [-1.2, -0.3, 0.0, 0.5, 0.9] {
            let x = HilbertVector::new(vec![c]).unwrap();
            let expected = 0.5 * PI * PI * c * c + a * (3.0 * c.powi(4) / 8.0 - c * c / 2.0);
            assert!((g.potential_raw(&x) - expected).abs() < 1e-12);
        }
        let zero = g.zeros();
        assert_eq!(g.potential_raw(&zero), 0.0);
        assert!((g.potential(&zero) - a / 4.0).abs() < 1e-9);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = ci(4);
        let x = HilbertVector::new(vec![0.4, -0.2, 0.1, 0.05]).unwrap();
        let jac = g.jacobian(&x);
        let h = 1e-6;
        for b in 0..4 {
            let mut xp = x.clone();
            xp.coeffs_mut()[b] += h;
            let mut xm = x.clone();
            xm.coeffs_mut()[b] -= h;
            let fp = g.vector_field(&xp);
            let fm = g.vector_field(&xm);
            for a in 0..4 {
                let fd = (fp.coeffs()[a] - fm.coeffs()[a]) / (2.0 * h);
                assert!((fd - jac[(a, b)]).abs() < 1e-5 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn stiff_states_are_substepped() {
        let g = ci(4);
        let mut c = vec![50.0, 0.0, 10.0, 0.0];
        let mut ws = Workspace::new(&g);
        let before = h_norm_sq(&c);
        g.flow_step(&mut c, 0.01, &mut ws);
        assert!(c.iter().all(|v| v.is_finite()));
        assert!(h_norm_sq(&c) < before);
    }
}
