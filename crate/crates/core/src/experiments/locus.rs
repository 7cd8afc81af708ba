//! Exit-locus campaigns: where the trials leave the domain, compared with
//! the limit-measure ratios and with the model loci.

use serde::{Deserialize, Serialize};

use super::config::{CampaignConfig, HalfSpace, System};
use super::exit::{run_exit_campaign_on, ExitCampaign, ExitSummary};
use super::stats::mean_and_se;
use crate::coefficient::Coefficient;
use crate::error::{Error, Result};
use crate::spectral::HilbertVector;
use crate::theory::{check_boundary_mass, ray_profile, RayOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusFrequency {
    pub epsilon: f64,
    /// Uncensored trials.
    pub exits: usize,
    pub hits: usize,
    pub frequency: f64,
    pub std_error: f64,
    /// Share of model loci in the set.
    pub model_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusSetResult {
    pub name: String,
    /// `m(U ∩ D^c) / m(D^c)`.
    pub theory_ratio: f64,
    /// Share of the set's ray mass flagged as boundary mass.
    pub boundary_fraction: f64,
    pub per_epsilon: Vec<LocusFrequency>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusDistance {
    pub epsilon: f64,
    /// Exponent `p` of the distance `E‖X(τ) - model locus‖^p`.
    pub p: f64,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusSummary {
    pub sets: Vec<LocusSetResult>,
    pub distances: Vec<LocusDistance>,
    /// Whether the mean distance decreases strictly along the grid.
    pub distance_decreasing: bool,
    pub exit: ExitSummary,
}

/// Test sets of a campaign: the configured ones, or for a rank-one
/// coefficient with direction `v` the shifted half-space `ℋ(v) + v`.
pub fn locus_sets(cfg: &CampaignConfig, system: &System) -> Result<Vec<HalfSpace>> {
    if !cfg.locus_sets.is_empty() {
        return Ok(cfg.locus_sets.clone());
    }
    match &system.coefficient {
        Coefficient::RankOne { direction } => Ok(vec![HalfSpace {
            name: "H(v)+v".into(),
            normal: direction.clone(),
            offset: direction.h_norm_sq(),
        }]),
        _ => Err(Error::Config("the locus campaign needs at least one entry in locus_sets".into())),
    }
}

/// Theory ratio of one test set, after rejecting sets with boundary mass.
pub fn theory_ratio(system: &System, set: &HalfSpace) -> Result<(f64, f64)> {
    if set.normal.modes() != system.spec.modes {
        return Err(Error::Config(format!("locus set {} has the wrong number of modes", set.name)));
    }
    let opts = RayOptions::default();
    let boundary = check_boundary_mass(&system.measure, &system.coefficient, &system.phi, |x| Ok(set.contains(x)), &opts)
        .map_err(|e| match e {
            Error::BoundaryMass(m) => Error::BoundaryMass(format!("locus set {}: {m}", set.name)),
            other => other,
        })?;
    let exit = ray_profile(&system.measure, &system.coefficient, &system.phi, |x| Ok(!system.domain.contains(x)?), &opts)?
        .limit_mass(&system.measure);
    if !(exit > 0.0) {
        return Err(Error::ZeroExitRate);
    }
    let hit = ray_profile(
        &system.measure,
        &system.coefficient,
        &system.phi,
        |x| Ok(set.contains(x) && !system.domain.contains(x)?),
        &opts,
    )?
    .limit_mass(&system.measure);
    Ok((hit / exit, boundary))
}

pub fn run_locus_campaign(cfg: &CampaignConfig) -> Result<(LocusSummary, ExitCampaign)> {
    cfg.validate()?;
    let system = System::build(&cfg.system_spec()?)?;
    let sets = locus_sets(cfg, &system)?;
    let ratios = sets.iter().map(|s| theory_ratio(&system, s)).collect::<Result<Vec<_>>>()?;
    let campaign = run_exit_campaign_on(cfg, &system)?;
    let summary = summarise(cfg, &sets, &ratios, &campaign);
    Ok((summary, campaign))
}

fn summarise(cfg: &CampaignConfig, sets: &[HalfSpace], ratios: &[(f64, f64)], c: &ExitCampaign) -> LocusSummary {
    let by_eps = |eps: f64| {
        c.records
            .iter()
            .zip(&c.model_loci)
            .filter(move |(r, _)| r.epsilon == eps && !r.censored())
    };
    let mut results = Vec::new();
    for (set, (ratio, boundary)) in sets.iter().zip(ratios) {
        let per_epsilon = cfg
            .epsilons
            .iter()
            .map(|&eps| {
                let (mut exits, mut hits, mut model_hits) = (0usize, 0usize, 0usize);
                for (r, m) in by_eps(eps) {
                    exits += 1;
                    let locus = HilbertVector::new(r.locus.clone()).expect("finite locus");
                    hits += set.contains(&locus) as usize;
                    model_hits += set.contains(m) as usize;
                }
                let p = hits as f64 / exits.max(1) as f64;
                LocusFrequency {
                    epsilon: eps,
                    exits,
                    hits,
                    frequency: p,
                    std_error: (p * (1.0 - p) / exits.max(1) as f64).sqrt(),
                    model_frequency: model_hits as f64 / exits.max(1) as f64,
                }
            })
            .collect();
        results.push(LocusSetResult {
            name: set.name.clone(),
            theory_ratio: *ratio,
            boundary_fraction: *boundary,
            per_epsilon,
        });
    }
    let distances: Vec<LocusDistance> = cfg
        .epsilons
        .iter()
        .map(|&eps| {
            let d: Vec<f64> = by_eps(eps)
                .map(|(r, m)| HilbertVector::new(r.locus.clone()).expect("finite locus").h_distance(m))
                .collect();
            let (mean, std_error) = mean_and_se(&d);
            LocusDistance { epsilon: eps, p: 1.0, mean, std_error }
        })
        .collect();
    let distance_decreasing = distances.windows(2).all(|w| w[1].mean < w[0].mean);
    LocusSummary { sets: results, distances, distance_decreasing, exit: c.summary.clone() }
}
