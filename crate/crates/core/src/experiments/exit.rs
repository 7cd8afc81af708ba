//! Exit-time campaigns: first-exit trials coupled to the exit models on the
//! same large-jump streams.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CampaignConfig, System};
use super::records::ExitRecord;
use super::stats::{exp1_cdf, fit_line, ks_test, mean_and_se, moments, KsResult, LineFit, Moment};
use super::theory_summary::{theory_summary, TheoryAtEpsilon, TheorySummary};
use crate::error::{Error, Result};
use crate::levy::{trial_rng, LargeJumpStream, LARGE_JUMP_STREAM, SMALL_JUMP_STREAM};
use crate::models::{build_model, model_locus};
use crate::solver::{run_trial, Integrator, TrialSetup};
use crate::spectral::HilbertVector;

/// Censoring share above which a campaign is flagged invalid.
pub const MAX_CENSORED_FRACTION: f64 = 0.2;

/// Summary statistics at one noise intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSummary {
    pub theory: TheoryAtEpsilon,
    pub horizon: f64,
    pub trials: usize,
    pub censored: usize,
    pub censored_fraction: f64,
    pub mean_tau: f64,
    pub mean_tau_se: f64,
    /// `λ_ε E[τ]`.
    pub normalized_mean: f64,
    pub normalized_variance: f64,
    /// Moments 1 to 3 of `λ_ε τ` against `1, 2, 6`.
    pub moments: Vec<Moment>,
    pub ks: Option<KsResult>,
    /// Share of trials whose causal jump index equals the model index.
    pub agreement_rate: f64,
    pub agreement_se: f64,
    /// Share of exits caused by a large jump.
    pub jump_caused_fraction: f64,
    pub sigma1_fraction: f64,
    pub sigma2_fraction: f64,
    /// Mean H-distance between trial and model exit loci (uncensored trials).
    pub locus_l1_distance: f64,
    pub locus_l1_distance_se: f64,
    /// KS of `λ_ε s̄` from the models run alongside the trials.
    pub model_ks: KsResult,
    pub small_jump_rate: f64,
    /// Second moment per unit time of the truncated small jumps, scaled by `ε²`.
    pub dropped_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitSummary {
    pub per_epsilon: Vec<EpsilonSummary>,
    /// Fit of `log E[τ]` against `log(1/ε)`.
    pub slope: Option<LineFit>,
    pub valid: bool,
    pub problems: Vec<String>,
    pub theory: TheorySummary,
}

/// Records and model loci of one campaign.
#[derive(Debug, Clone)]
pub struct ExitCampaign {
    pub summary: ExitSummary,
    pub records: Vec<ExitRecord>,
    /// Model exit locus of every record, in record order.
    pub model_loci: Vec<HilbertVector>,
    pub modes: usize,
}

struct TrialOutput {
    record: ExitRecord,
    model_locus: HilbertVector,
    locus_distance: Option<f64>,
    model_s: f64,
    sigma1: bool,
    sigma2: bool,
    jump_caused: bool,
}

pub fn run_exit_campaign(cfg: &CampaignConfig) -> Result<ExitCampaign> {
    cfg.validate()?;
    let system = System::build(&cfg.system_spec()?)?;
    run_exit_campaign_on(cfg, &system)
}

pub fn run_exit_campaign_on(cfg: &CampaignConfig, system: &System) -> Result<ExitCampaign> {
    let theory = theory_summary(cfg, system)?;
    let mut per_epsilon = Vec::new();
    let mut records = Vec::new();
    let mut model_loci = Vec::new();
    let mut problems = Vec::new();
    for (ei, at) in theory.epsilons.iter().enumerate() {
        let (summary, outputs) = run_epsilon(cfg, system, ei, at)?;
        if summary.censored_fraction > MAX_CENSORED_FRACTION {
            problems.push(format!(
                "epsilon {}: {:.1}% of trials censored; the horizon is too short",
                at.epsilon,
                100.0 * summary.censored_fraction
            ));
        }
        per_epsilon.push(summary);
        for o in outputs {
            records.push(o.record);
            model_loci.push(o.model_locus);
        }
    }
    let slope = scaling_fit(&per_epsilon)?;
    Ok(ExitCampaign {
        summary: ExitSummary { per_epsilon, slope, valid: problems.is_empty(), problems, theory },
        records,
        model_loci,
        modes: system.spec.modes,
    })
}

fn scaling_fit(rows: &[EpsilonSummary]) -> Result<Option<LineFit>> {
    let usable: Vec<_> = rows.iter().filter(|r| r.mean_tau.is_finite() && r.mean_tau_se > 0.0).collect();
    if usable.len() < 2 {
        return Ok(None);
    }
    let xs: Vec<f64> = usable.iter().map(|r| (1.0 / r.theory.epsilon).ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|r| r.mean_tau.ln()).collect();
    let sig: Vec<f64> = usable.iter().map(|r| r.mean_tau_se / r.mean_tau).collect();
    fit_line(&xs, &ys, Some(&sig)).map(Some)
}

fn run_epsilon(
    cfg: &CampaignConfig,
    system: &System,
    eps_index: usize,
    at: &TheoryAtEpsilon,
) -> Result<(EpsilonSummary, Vec<TrialOutput>)> {
    let eps = at.epsilon;
    if !(at.lambda > 0.0) {
        return Err(Error::ZeroExitRate);
    }
    let horizon = cfg.horizon.horizon(at.lambda)?;
    let reduced = system.reduced_domain(eps, cfg.shrink_exponent)?;
    let setup = TrialSetup {
        galerkin: &system.galerkin,
        measure: &system.measure,
        coefficient: &system.coefficient,
        domain: &reduced,
        level_set: system.level_set.as_ref(),
        eps,
        threshold: at.rho_eps,
        horizon,
        config: &cfg.solver,
    };
    let base = (eps_index * cfg.trials) as u64;
    let outputs: Vec<TrialOutput> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| one_trial(cfg, system, &setup, at, base + i))
        .collect::<Result<_>>()?;
    let probe = Integrator::new(
        &system.galerkin,
        &system.coefficient,
        Some(&system.measure),
        eps,
        at.rho_eps,
        &cfg.solver,
        trial_rng(cfg.seed, 0, SMALL_JUMP_STREAM),
    )?;
    let dropped = eps * eps * probe.dropped_variance();
    Ok((summarise(at.clone(), horizon, &outputs, probe.small_jump_rate(), dropped)?, outputs))
}

fn one_trial(
    cfg: &CampaignConfig,
    system: &System,
    setup: &TrialSetup<'_>,
    at: &TheoryAtEpsilon,
    trial_id: u64,
) -> Result<TrialOutput> {
    let mut large = LargeJumpStream::new(&system.measure, at.rho_eps, trial_rng(cfg.seed, trial_id, LARGE_JUMP_STREAM))?;
    let res = run_trial(setup, &system.phi, Some(&mut large), trial_rng(cfg.seed, trial_id, SMALL_JUMP_STREAM))?;
    let model = build_model(
        &mut large,
        at.epsilon,
        &system.phi,
        &system.coefficient,
        |x| system.domain.contains(x),
        at.lambda,
    )?;
    let m_locus = model_locus(&model, at.epsilon, &system.phi, &system.coefficient);
    let locus_distance = res.tau.map(|_| res.locus.h_distance(&m_locus));
    let record = ExitRecord {
        trial_id,
        epsilon: at.epsilon,
        tau: res.tau,
        tau_normalized: res.tau.map(|t| at.lambda * t),
        jump_count: res.jump_count,
        causal_jump_index: res.causal_jump,
        model_k: model.k,
        model_s_bar: model.s_bar,
        agreement: res.causal_jump == Some(model.k),
        locus: res.locus.into_coeffs(),
    };
    Ok(TrialOutput {
        jump_caused: record.causal_jump_index.is_some(),
        record,
        model_locus: m_locus,
        locus_distance,
        model_s: model.s,
        sigma1: res.sigma1,
        sigma2: res.sigma2,
    })
}

fn fraction(n: usize, total: usize) -> (f64, f64) {
    let p = n as f64 / total as f64;
    (p, (p * (1.0 - p) / total as f64).sqrt())
}

fn summarise(
    theory: TheoryAtEpsilon,
    horizon: f64,
    outputs: &[TrialOutput],
    small_jump_rate: f64,
    dropped_variance: f64,
) -> Result<EpsilonSummary> {
    let trials = outputs.len();
    let taus: Vec<f64> = outputs.iter().filter_map(|o| o.record.tau).collect();
    let normalized: Vec<f64> = outputs.iter().filter_map(|o| o.record.tau_normalized).collect();
    let censored = trials - taus.len();
    let (mean_tau, mean_tau_se) = mean_and_se(&taus);
    let (normalized_mean, _) = mean_and_se(&normalized);
    let normalized_variance = if normalized.len() > 1 {
        normalized.iter().map(|x| (x - normalized_mean).powi(2)).sum::<f64>() / (normalized.len() - 1) as f64
    } else {
        f64::NAN
    };
    let agree = outputs.iter().filter(|o| o.record.agreement).count();
    let (agreement_rate, agreement_se) = fraction(agree, trials);
    let dists: Vec<f64> = outputs.iter().filter_map(|o| o.locus_distance).collect();
    let (locus_l1_distance, locus_l1_distance_se) = mean_and_se(&dists);
    let model_s: Vec<f64> = outputs.iter().map(|o| o.model_s).collect();
    Ok(EpsilonSummary {
        theory,
        horizon,
        trials,
        censored,
        censored_fraction: censored as f64 / trials as f64,
        mean_tau,
        mean_tau_se,
        normalized_mean,
        normalized_variance,
        moments: moments(&normalized, 3),
        ks: if normalized.is_empty() { None } else { Some(ks_test(&normalized, exp1_cdf)?) },
        agreement_rate,
        agreement_se,
        jump_caused_fraction: fraction(outputs.iter().filter(|o| o.jump_caused).count(), trials).0,
        sigma1_fraction: fraction(outputs.iter().filter(|o| o.sigma1).count(), trials).0,
        sigma2_fraction: fraction(outputs.iter().filter(|o| o.sigma2).count(), trials).0,
        locus_l1_distance,
        locus_l1_distance_se,
        model_ks: ks_test(&model_s, exp1_cdf)?,
        small_jump_rate,
        dropped_variance,
    })
}

/// Summary statistics of an externally supplied normalised sample, used as
/// an exact-law control that bypasses the solver.
pub fn normalized_sample_summary(samples: &[f64]) -> Result<(Vec<Moment>, KsResult)> {
    Ok((moments(samples, 3), ks_test(samples, exp1_cdf)?))
}
