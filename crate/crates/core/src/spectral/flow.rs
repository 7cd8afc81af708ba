use std::sync::Arc;

use super::galerkin::{check_blow_up, Galerkin, Workspace, DEFAULT_BLOW_UP_CAP};
use super::vector::{h_distance, h_norm_sq, HilbertVector};
use crate::error::{invalid, Error, Result};

/// Approximates the mild solution `u(t; x)` with exponential-Euler steps of
/// size `dt` (the linear part is integrated exactly).
pub fn evolve_deterministic(g: &Galerkin, x: &HilbertVector, t: f64, dt: f64) -> Result<HilbertVector> {
    evolve_with_cap(g, x, t, dt, DEFAULT_BLOW_UP_CAP)
}

pub fn evolve_with_cap(
    g: &Galerkin,
    x: &HilbertVector,
    t: f64,
    dt: f64,
    cap: f64,
) -> Result<HilbertVector> {
    g.check(x)?;
    if !(t >= 0.0) || !(dt > 0.0) {
        return Err(invalid("need t >= 0 and dt > 0"));
    }
    let mut c = x.coeffs().to_vec();
    let mut ws = Workspace::new(g);
    let steps = (t / dt).ceil() as usize;
    let mut time = 0.0;
    for k in 0..steps {
        let h = if k + 1 == steps { t - time } else { dt };
        if h <= 0.0 {
            break;
        }
        let before = h_norm_sq(&c);
        g.flow_step(&mut c, h, &mut ws);
        time += h;
        check_blow_up(before, &c, cap, time)?;
    }
    HilbertVector::new(c)
}

/// Sub-level set `𝒰^r = {x : V(x) <= d*(r)}` with `d*(r) = sup_{‖x‖ <= r} V(x)`.
///
/// For `f = 0` the potential is `½‖x‖²`, the level set is exactly the ball
/// `B_r(0)` and everything below is analytic. Otherwise `d*(r)` is the maximum
/// of `V` over a deterministic probe set inside `B_r(0)`.
#[derive(Debug, Clone)]
pub struct LevelSet {
    galerkin: Arc<Galerkin>,
    radius: f64,
    threshold: f64,
}

impl LevelSet {
    pub fn new(galerkin: Arc<Galerkin>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(invalid("level-set radius must be positive"));
        }
        let threshold = if galerkin.nonlinearity().is_zero() {
            0.5 * radius * radius
        } else {
            let n = galerkin.modes();
            let mut best = 0.0f64;
            for dir in probe_directions(n, n.min(6)) {
                for k in 1..=16 {
                    let x = dir.scaled(radius * k as f64 / 16.0);
                    best = best.max(galerkin.potential(&x));
                }
            }
            best
        };
        Ok(Self { galerkin, radius, threshold })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `d*(r)`.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Exact ball radius when the level set is a centred H-ball.
    pub fn analytic_ball(&self) -> Option<f64> {
        self.galerkin.nonlinearity().is_zero().then_some(self.radius)
    }

    pub fn contains(&self, x: &HilbertVector) -> bool {
        match self.analytic_ball() {
            Some(r) => x.h_norm() <= r,
            None => self.galerkin.potential(x) <= self.threshold,
        }
    }
}

/// Unit (H-norm) probe directions: `±e_n/(nπ)` for every mode, plus the
/// normalised pairwise combinations `±(p_a ± p_b)/√2` among the first
/// `pair_modes` modes.
pub fn probe_directions(modes: usize, pair_modes: usize) -> Vec<HilbertVector> {
    let mut out = Vec::new();
    for n in 1..=modes {
        let u = HilbertVector::unit_mode(modes, n);
        out.push(-&u);
        out.push(u);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for a in 1..=pair_modes {
        for b in (a + 1)..=pair_modes {
            let pa = HilbertVector::unit_mode(modes, a);
            let pb = HilbertVector::unit_mode(modes, b);
            for (sa, sb) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut v = pa.scaled(sa * s);
                v.axpy(sb * s, &pb);
                out.push(v);
            }
        }
    }
    out
}

/// First time `t` at which `‖u(t; x) - target‖ < gamma / 4`, resolved inside
/// the final step by bisection on the step length.
pub fn relaxation_time(
    g: &Galerkin,
    x: &HilbertVector,
    target: &HilbertVector,
    gamma: f64,
    dt: f64,
    horizon: f64,
) -> Result<f64> {
    g.check(x)?;
    if !(gamma > 0.0) {
        return Err(invalid("gamma must be positive"));
    }
    let goal = 0.25 * gamma;
    let target = target.coeffs();
    let mut c = x.coeffs().to_vec();
    if h_distance(&c, target) < goal {
        return Ok(0.0);
    }
    let mut ws = Workspace::new(g);
    let mut t = 0.0;
    while t < horizon {
        let prev = c.clone();
        let before = h_norm_sq(&c);
        g.flow_step(&mut c, dt, &mut ws);
        check_blow_up(before, &c, DEFAULT_BLOW_UP_CAP, t + dt)?;
        if h_distance(&c, target) < goal {
            let (mut lo, mut hi) = (0.0, dt);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let mut trial = prev.clone();
                g.flow_step(&mut trial, mid, &mut ws);
                if h_distance(&trial, target) < goal {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(t + hi);
        }
        t += dt;
    }
    Err(Error::HorizonExceeded { horizon, what: "relaxation to the stable state".into() })
}

/// Result of fitting relaxation time against `|ln γ|`.
#[derive(Debug, Clone)]
pub struct Kappa0Estimate {
    /// Largest fitted slope over the sampled initial conditions.
    pub kappa0: f64,
    /// Per-sample least-squares slopes.
    pub slopes: Vec<f64>,
}

/// Estimates `κ₀` as the largest slope of relaxation time against `|ln γ|`.
pub fn estimate_kappa0(
    g: &Galerkin,
    samples: &[(HilbertVector, HilbertVector)],
    gammas: &[f64],
    dt: f64,
    horizon: f64,
) -> Result<Kappa0Estimate> {
    if gammas.len() < 2 || samples.is_empty() {
        return Err(invalid("need at least two gamma values and one sample"));
    }
    let xs: Vec<f64> = gammas.iter().map(|g| g.ln().abs()).collect();
    let mut slopes = Vec::with_capacity(samples.len());
    for (x, target) in samples {
        let ys = gammas
            .iter()
            .map(|gm| relaxation_time(g, x, target, *gm, dt, horizon))
            .collect::<Result<Vec<_>>>()?;
        slopes.push(ols_slope(&xs, &ys));
    }
    let kappa0 = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Kappa0Estimate { kappa0, slopes })
}

pub(crate) fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Nonlinearity;
    use std::f64::consts::PI;

    fn heat(modes: usize) -> Galerkin {
        Galerkin::new(modes, Nonlinearity::Zero).unwrap()
    }

    fn ci(modes: usize) -> Galerkin {
        Galerkin::new(modes, Nonlinearity::chafee_infante(2.0 * PI * PI).unwrap()).unwrap()
    }

    #[test]
    fn heat_semigroup_on_one_mode() {
        let x = HilbertVector::mode(1, 1, 1.0);
        let u = evolve_deterministic(&heat(1), &x, 0.1, 0.01).unwrap();
        assert!((u.coeffs()[0] - (-PI * PI * 0.1f64).exp()).abs() < 1e-12);
        assert!((u.coeffs()[0] - 0.372708).abs() < 1e-6);
    }

    #[test]
    fn single_mode_chafee_infante_converges() {
        // -π²c + ac - (3/2)ac³ = 0 with a = 2π² gives c = 1/√3, i.e. the
        // profile c√2 sin(πζ) has amplitude √(2/3).
        let x = HilbertVector::mode(1, 1, 0.5 / 2f64.sqrt());
        let u = evolve_deterministic(&ci(1), &x, 20.0, 0.01).unwrap();
        assert!((u.coeffs()[0] - 1.0 / 3f64.sqrt()).abs() < 1e-9);
        assert!((u.eval(0.5) - (2.0f64 / 3.0).sqrt()).abs() < 1e-9);
        assert!((u.eval(0.5) - 0.81650).abs() < 1e-5);
    }

    #[test]
    fn origin_is_invariant() {
        let g = ci(6);
        let u = evolve_deterministic(&g, &g.zeros(), 5.0, 0.01).unwrap();
        assert_eq!(u.h_norm(), 0.0);
    }

    #[test]
    fn semigroup_contracts() {
        let g = heat(8);
        let x = HilbertVector::new(vec![1.0, -0.5, 0.2, 0.0, 0.1, 0.0, 0.0, 0.3]).unwrap();
        for t in [0.01, 0.1, 0.5] {
            let u = evolve_deterministic(&g, &x, t, 0.01).unwrap();
            assert!(u.h_norm() <= (-PI * PI * t).exp() * x.h_norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn lyapunov_descent_and_level_set_invariance() {
        let g = Arc::new(ci(6));
        let level = LevelSet::new(g.clone(), 3.0).unwrap();
        let mut x = HilbertVector::new(vec![0.4, 0.3, -0.2, 0.1, 0.0, -0.05]).unwrap();
        assert!(level.contains(&x));
        let mut v = g.potential(&x);
        for _ in 0..200 {
            x = evolve_deterministic(&g, &x, 0.02, 0.01).unwrap();
            let vn = g.potential(&x);
            assert!(vn <= v + 1e-9, "potential increased {v} -> {vn}");
            assert!(level.contains(&x));
            v = vn;
        }
    }

    #[test]
    fn blow_up_guard_triggers() {
        // A tiny cap makes any growth a divergence.
        let g = Galerkin::new(1, Nonlinearity::Polynomial { coeffs: vec![0.0, 100.0, 0.0, -1.0] })
            .unwrap();
        let x = HilbertVector::mode(1, 1, 0.01);
        let err = evolve_with_cap(&g, &x, 1.0, 0.01, 0.05).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn linear_heat_relaxation_time() {
        let g = heat(3);
        let x = HilbertVector::unit_mode(3, 1);
        let zero = g.zeros();
        for gamma in [0.5, 0.1, 0.01] {
            let t = relaxation_time(&g, &x, &zero, gamma, 0.01, 10.0).unwrap();
            let exact = (4.0 / gamma).ln() / (PI * PI);
            assert!((t - exact).abs() < 1e-12, "{t} vs {exact}");
        }
        assert_eq!(relaxation_time(&g, &zero, &zero, 0.1, 0.01, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn kappa0_slope_is_positive_and_stable() {
        let g = ci(4);
        let phi = HilbertVector::new(vec![0.5773502691896258, 0.0, 0.0, 0.0]).unwrap();
        let phi = crate::spectral::newton_refine(&g, &phi).unwrap();
        let x = HilbertVector::new(vec![0.2, 0.05, 0.02, 0.0]).unwrap();
        let coarse = estimate_kappa0(&g, &[(x.clone(), phi.clone())], &[1e-1, 1e-2, 1e-3], 0.01, 50.0)
            .unwrap();
        let fine = estimate_kappa0(&g, &[(x, phi)], &[1e-3, 1e-4, 1e-5], 0.01, 50.0).unwrap();
        assert!(coarse.kappa0 > 0.0 && fine.kappa0 > 0.0);
        assert!((coarse.kappa0 - fine.kappa0).abs() < 0.1 * fine.kappa0);
    }
}
