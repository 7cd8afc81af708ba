//! Exact-law checks of the exit models: the index is Geometric(λ_ε/β_ε)
//! and the normalised arrival time is Exp(1) at every noise intensity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CampaignConfig, System};
use super::stats::{exp1_cdf, geometric_chi_square, ks_test, mean_and_se, ChiSquareResult, KsResult};
use super::theory_summary::{theory_summary, TheorySummary};
use crate::error::{Error, Result};
use crate::levy::{trial_rng, LargeJumpStream, LARGE_JUMP_STREAM};
use crate::models::build_model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelLawCheck {
    pub epsilon: f64,
    pub streams: usize,
    /// Success probability `λ_ε/β_ε`.
    pub success_probability: f64,
    pub mean_k: f64,
    pub mean_k_se: f64,
    pub expected_mean_k: f64,
    pub mean_s: f64,
    pub mean_s_se: f64,
    pub chi_square: ChiSquareResult,
    pub ks: KsResult,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelsCheckSummary {
    pub significance: f64,
    pub checks: Vec<ModelLawCheck>,
    pub passed: bool,
    pub theory: TheorySummary,
}

pub fn run_models_check(cfg: &CampaignConfig) -> Result<ModelsCheckSummary> {
    cfg.validate()?;
    let system = System::build(&cfg.system_spec()?)?;
    let theory = theory_summary(cfg, &system)?;
    let streams = cfg.models.streams;
    if streams < 50 {
        return Err(Error::Config(format!("models.streams = {streams} is below 50")));
    }
    let mut checks = Vec::new();
    for (ei, at) in theory.epsilons.iter().enumerate() {
        if !(at.lambda > 0.0) {
            return Err(Error::ZeroExitRate);
        }
        let p = at.lambda / at.beta;
        if p > 1.0 + 1e-12 {
            return Err(Error::InvalidInput(format!(
                "at epsilon {} the exit rate exceeds the large-jump rate; the threshold is too high",
                at.epsilon
            )));
        }
        let base = (ei * streams) as u64;
        let outcomes: Vec<(usize, f64)> = (0..streams as u64)
            .into_par_iter()
            .map(|i| {
                let rng = trial_rng(cfg.seed, base + i, LARGE_JUMP_STREAM);
                let mut stream = LargeJumpStream::new(&system.measure, at.rho_eps, rng)?;
                let m = build_model(
                    &mut stream,
                    at.epsilon,
                    &system.phi,
                    &system.coefficient,
                    |x| system.domain.contains(x),
                    at.lambda,
                )?;
                Ok((m.k, m.s))
            })
            .collect::<Result<_>>()?;
        let ks_samples: Vec<usize> = outcomes.iter().map(|o| o.0).collect();
        let s_samples: Vec<f64> = outcomes.iter().map(|o| o.1).collect();
        let (mean_k, mean_k_se) = mean_and_se(&ks_samples.iter().map(|k| *k as f64).collect::<Vec<_>>());
        let (mean_s, mean_s_se) = mean_and_se(&s_samples);
        let chi_square = geometric_chi_square(&ks_samples, p.min(1.0))?;
        let ks = ks_test(&s_samples, exp1_cdf)?;
        checks.push(ModelLawCheck {
            epsilon: at.epsilon,
            streams,
            success_probability: p,
            mean_k,
            mean_k_se,
            expected_mean_k: 1.0 / p,
            mean_s,
            mean_s_se,
            passed: chi_square.p_value >= cfg.significance && ks.p_value >= cfg.significance,
            chi_square,
            ks,
        });
    }
    Ok(ModelsCheckSummary {
        significance: cfg.significance,
        passed: checks.iter().all(|c| c.passed),
        checks,
        theory,
    })
}
