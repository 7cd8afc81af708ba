//! Small-deviation probe: how often the path driven by the small jumps alone
//! strays from the deterministic flow before the first large jump.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CampaignConfig, System};
use crate::error::{Error, Result};
use crate::levy::{trial_rng, LargeJumpStream, LARGE_JUMP_STREAM, SMALL_JUMP_STREAM};
use crate::solver::small_deviation_exceeds;
use crate::theory::ScaleParams;

pub const MIN_REPLICATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeAtEpsilon {
    pub epsilon: f64,
    pub gamma_eps: f64,
    pub rho_eps: f64,
    pub threshold: f64,
    pub replications: usize,
    pub exceedances: usize,
    pub probability: f64,
    pub std_error: f64,
    /// Mean of the first large-jump time `T₁`.
    pub mean_t1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub scales: ScaleParams,
    pub per_epsilon: Vec<ProbeAtEpsilon>,
}

pub fn run_probe(cfg: &CampaignConfig) -> Result<ProbeSummary> {
    cfg.validate()?;
    let reps = cfg.probe.replications;
    if reps < MIN_REPLICATIONS {
        return Err(Error::Config(format!("probe.replications = {reps} is below {MIN_REPLICATIONS}")));
    }
    let system = System::build(&cfg.system_spec()?)?;
    let scales = cfg.scales(&system)?;
    let x0 = cfg.probe.x0.clone().unwrap_or_else(|| system.phi.clone());
    if x0.modes() != system.spec.modes {
        return Err(Error::Config("probe.x0 has the wrong number of modes".into()));
    }
    let mut per_epsilon = Vec::new();
    for (ei, &eps) in cfg.epsilons.iter().enumerate() {
        let gamma_eps = scales.gamma_eps(eps);
        let rho_eps = scales.rho_eps(eps);
        let threshold = cfg.probe.threshold_factor * gamma_eps;
        let base = (ei * reps) as u64;
        let outcomes: Vec<(bool, f64)> = (0..reps as u64)
            .into_par_iter()
            .map(|i| {
                let id = base + i;
                let mut large =
                    LargeJumpStream::new(&system.measure, rho_eps, trial_rng(cfg.seed, id, LARGE_JUMP_STREAM))?;
                let t1 = large.event(0).time;
                let hit = small_deviation_exceeds(
                    &system.galerkin,
                    &system.measure,
                    &system.coefficient,
                    &cfg.solver,
                    eps,
                    rho_eps,
                    &x0,
                    t1,
                    threshold,
                    trial_rng(cfg.seed, id, SMALL_JUMP_STREAM),
                )?;
                Ok((hit, t1))
            })
            .collect::<Result<_>>()?;
        let exceedances = outcomes.iter().filter(|o| o.0).count();
        let p = exceedances as f64 / reps as f64;
        per_epsilon.push(ProbeAtEpsilon {
            epsilon: eps,
            gamma_eps,
            rho_eps,
            threshold,
            replications: reps,
            exceedances,
            probability: p,
            std_error: (p * (1.0 - p) / reps as f64).sqrt(),
            mean_t1: outcomes.iter().map(|o| o.1).sum::<f64>() / reps as f64,
        });
    }
    Ok(ProbeSummary { scales, per_epsilon })
}
