use nalgebra::{DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::galerkin::Galerkin;
use super::vector::HilbertVector;
use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 100;
const SEED_AMPLITUDE: f64 = 2.0;
const SEED_GRID: usize = 9;
const DEDUP_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
}

/// Equilibrium of the Galerkin system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPoint {
    pub state: HilbertVector,
    pub stability: Stability,
    /// Largest eigenvalue of the (symmetric) Jacobian.
    pub max_eigenvalue: f64,
    /// Number of positive Jacobian eigenvalues.
    pub morse_index: usize,
    /// H-norm of the vector field at `state`.
    pub residual: f64,
}

/// Damped Newton iteration for a zero of the Galerkin vector field.
pub fn newton_refine(g: &Galerkin, seed: &HilbertVector) -> Result<HilbertVector> {
    g.check(seed)?;
    let mut x = seed.clone();
    let mut res = g.vector_field(&x).l2_norm();
    for _ in 0..NEWTON_MAX_ITER {
        if res < NEWTON_TOL {
            return Ok(x);
        }
        let jac = g.jacobian(&x);
        let rhs = -DVector::from_column_slice(g.vector_field(&x).coeffs());
        let Some(step) = jac.lu().solve(&rhs) else {
            return Err(Error::NoFixedPoints);
        };
        let step = HilbertVector::new(step.as_slice().to_vec())?;
        let mut t = 1.0;
        loop {
            let mut cand = x.clone();
            cand.axpy(t, &step);
            let r = g.vector_field(&cand).l2_norm();
            if r < res || t < 1e-6 {
                x = cand;
                res = r;
                break;
            }
            t *= 0.5;
        }
    }
    if res < 1e-9 {
        Ok(x)
    } else {
        Err(Error::NoFixedPoints)
    }
}

/// Finds the equilibria reachable by Newton from a seed grid on
/// `span{e_1, e_2}` plus the origin, classified by Jacobian spectrum.
///
/// Stable states come first, each class ordered by descending first
/// coefficient, so with Chafee-Infante index 0 is the positive state.
pub fn find_fixed_points(g: &Galerkin) -> Result<Vec<FixedPoint>> {
    let n = g.modes();
    let mut seeds = vec![g.zeros()];
    let second = n >= 2;
    for i in 0..SEED_GRID {
        let a = -SEED_AMPLITUDE + 2.0 * SEED_AMPLITUDE * i as f64 / (SEED_GRID - 1) as f64;
        if second {
            for j in 0..SEED_GRID {
                let b = -SEED_AMPLITUDE + 2.0 * SEED_AMPLITUDE * j as f64 / (SEED_GRID - 1) as f64;
                let mut s = g.zeros();
                s.coeffs_mut()[0] = a;
                s.coeffs_mut()[1] = b;
                seeds.push(s);
            }
        } else {
            seeds.push(HilbertVector::mode(n, 1, a));
        }
    }

    let mut found: Vec<FixedPoint> = Vec::new();
    for seed in &seeds {
        let Ok(x) = newton_refine(g, seed) else { continue };
        if found.iter().any(|p| p.state.h_distance(&x) < DEDUP_DISTANCE) {
            continue;
        }
        found.push(classify(g, x));
    }
    if found.is_empty() {
        return Err(Error::NoFixedPoints);
    }
    found.sort_by(|a, b| {
        let sa = (a.stability == Stability::Unstable) as u8;
        let sb = (b.stability == Stability::Unstable) as u8;
        sa.cmp(&sb).then(b.state.coeffs()[0].total_cmp(&a.state.coeffs()[0]))
    });
    Ok(found)
}

fn classify(g: &Galerkin, x: HilbertVector) -> FixedPoint {
    let jac = g.jacobian(&x);
    let eig = SymmetricEigen::new(jac).eigenvalues;
    let max_eigenvalue = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let morse_index = eig.iter().filter(|l| **l > 0.0).count();
    let residual = g.vector_field(&x).h_norm();
    FixedPoint {
        stability: if max_eigenvalue < 0.0 { Stability::Stable } else { Stability::Unstable },
        state: x,
        max_eigenvalue,
        morse_index,
        residual,
    }
}
