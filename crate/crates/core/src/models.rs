//! Exit models read off the large-jump stream: the first jump that, applied
//! at the stable state, leaves the domain.
//!
//! Because the success events are i.i.d. with probability `λ_ε/β_ε` and the
//! arrivals are Poisson, the index is exactly geometric and the arrival time
//! exactly exponential with rate `λ_ε`.

use serde::{Deserialize, Serialize};

use crate::coefficient::Coefficient;
use crate::error::{Error, Result};
use crate::levy::LargeJumpStream;
use crate::spectral::HilbertVector;

/// Safety stop for streams whose success probability is positive but tiny.
const MAX_SCAN: usize = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    /// Arrival time of the first successful jump.
    pub s_bar: f64,
    /// 1-based index of the first successful jump.
    pub k: usize,
    /// `λ_ε · s_bar`.
    pub s: f64,
    /// Unscaled mark of the successful jump.
    pub mark: HilbertVector,
}

/// Scans the stream for the first jump `W_j` with `φ + G(φ, ε W_j) ∉ D`.
pub fn build_model<F>(
    stream: &mut LargeJumpStream<'_>,
    eps: f64,
    phi: &HilbertVector,
    coefficient: &Coefficient,
    mut in_domain: F,
    lambda: f64,
) -> Result<ModelOutcome>
where
    F: FnMut(&HilbertVector) -> Result<bool>,
{
    if !(lambda > 0.0) {
        return Err(Error::ZeroExitRate);
    }
    let measure = stream.measure();
    for j in 0..MAX_SCAN {
        let e = stream.event(j);
        let mark = e.mark(measure);
        let mut landing = phi.clone();
        coefficient.jump_in_place(landing.coeffs_mut(), mark.coeffs(), eps);
        if !in_domain(&landing)? {
            return Ok(ModelOutcome { s_bar: e.time, k: j + 1, s: lambda * e.time, mark });
        }
    }
    Err(Error::ZeroExitRate)
}

/// `φ + G(φ, ε W_K)`.
pub fn model_locus(
    outcome: &ModelOutcome,
    eps: f64,
    phi: &HilbertVector,
    coefficient: &Coefficient,
) -> HilbertVector {
    let mut x = phi.clone();
    coefficient.jump_in_place(x.coeffs_mut(), outcome.mark.coeffs(), eps);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{trial_rng, LevyMeasure, SlowVariation};

    #[test]
    fn first_success_and_locus() {
        let m = LevyMeasure::symmetric(1.5, &[HilbertVector::unit_mode(1, 1)], 0.5, SlowVariation::Constant)
            .unwrap();
        let eps: f64 = 0.1;
        let rho = eps.powf(-0.2);
        let phi = HilbertVector::zeros(1);
        let ball = |x: &HilbertVector| Ok(x.h_norm() < 1.0);
        let lambda = eps.powf(1.5) / 1.5;
        for seed in 0..200 {
            let mut s = LargeJumpStream::new(&m, rho, trial_rng(seed, 0, 0)).unwrap();
            let out = build_model(&mut s, eps, &phi, &Coefficient::Additive, ball, lambda).unwrap();
            assert!(out.k >= 1);
            assert_eq!(out.s_bar, s.event(out.k - 1).time);
            for j in 0..out.k - 1 {
                assert!(eps * s.event(j).radius < 1.0);
            }
            let locus = model_locus(&out, eps, &phi, &Coefficient::Additive);
            assert!(locus.h_distance(&out.mark.scaled(eps)) < 1e-15);
            assert!(locus.h_norm() >= 1.0);
        }
        // A domain that every jump leaves gives K = 1.
        let mut s = LargeJumpStream::new(&m, rho, trial_rng(1, 0, 0)).unwrap();
        let out = build_model(&mut s, eps, &phi, &Coefficient::Additive, |_| Ok(false), 1.0).unwrap();
        assert_eq!(out.k, 1);
        assert_eq!(out.s_bar, s.event(0).time);
        let mut s = LargeJumpStream::new(&m, rho, trial_rng(1, 0, 0)).unwrap();
        assert!(matches!(
            build_model(&mut s, eps, &phi, &Coefficient::Additive, ball, 0.0),
            Err(Error::ZeroExitRate)
        ));
    }
}
