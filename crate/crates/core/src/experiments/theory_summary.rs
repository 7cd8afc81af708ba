//! Theory block: exit rates, limit masses, scales and the generator.

use serde::{Deserialize, Serialize};

use super::config::{CampaignConfig, System};
use crate::error::Result;
use crate::spectral::{BasinVerdict, DomainShape};
use crate::theory::{generator_matrix, ExitGeometry, GeneratorMatrix, RayOptions, ScaleParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryAtEpsilon {
    pub epsilon: f64,
    /// `λ_ε(D)`.
    pub lambda: f64,
    /// `λ_ε` of the reduced domain `D₂`, when it can be integrated exactly.
    pub lambda_reduced: Option<f64>,
    /// Large-jump rate `β_ε`.
    pub beta: f64,
    pub rho_eps: f64,
    pub gamma_eps: f64,
    /// Shrinking distance `δ` of the reduced domain.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheorySummary {
    pub system: String,
    pub alpha: f64,
    pub scales: ScaleParams,
    /// `m(D^c)` from the stable state.
    pub exit_mass: f64,
    pub stable_states: Vec<Vec<f64>>,
    pub epsilons: Vec<TheoryAtEpsilon>,
    pub generator: Option<GeneratorMatrix>,
    pub stationary: Option<Vec<f64>>,
}

impl TheorySummary {
    pub fn at(&self, eps: f64) -> Option<&TheoryAtEpsilon> {
        self.epsilons.iter().find(|t| t.epsilon == eps)
    }
}

/// Exit geometry of `D` seen from the system's stable state.
pub fn exit_geometry(system: &System) -> Result<ExitGeometry> {
    ExitGeometry::new(
        &system.measure,
        &system.coefficient,
        &system.phi,
        |x| system.domain.contains(x),
        &RayOptions::default(),
    )
}

/// `λ_ε(D₂)` for ball domains, where the reduced set is exact.
pub fn reduced_lambda(system: &System, cfg: &CampaignConfig, eps: f64) -> Result<Option<f64>> {
    if !matches!(system.domain.shape(), DomainShape::Ball { .. }) {
        return Ok(None);
    }
    let reduced = system.reduced_domain(eps, cfg.shrink_exponent)?;
    let geo = ExitGeometry::new(
        &system.measure,
        &system.coefficient,
        &system.phi,
        |x| reduced.contains(x),
        &RayOptions::default(),
    )?;
    Ok(Some(geo.lambda(&system.measure, eps)))
}

pub fn generator(system: &System) -> Result<Option<GeneratorMatrix>> {
    let Some(classifier) = &system.classifier else { return Ok(None) };
    let phis = classifier.stable_states().to_vec();
    if phis.len() < 2 {
        return Ok(None);
    }
    let basin = |x: &crate::spectral::HilbertVector| {
        Ok(match classifier.classify(x)? {
            BasinVerdict::Stable(i) => Some(i),
            BasinVerdict::Separatrix => None,
        })
    };
    generator_matrix(&system.measure, &system.coefficient, &phis, basin, &RayOptions::default()).map(Some)
}

pub fn theory_summary(cfg: &CampaignConfig, system: &System) -> Result<TheorySummary> {
    let scales = cfg.scales(system)?;
    let geo = exit_geometry(system)?;
    let mut epsilons = Vec::with_capacity(cfg.epsilons.len());
    for &eps in &cfg.epsilons {
        let rho_eps = scales.rho_eps(eps);
        epsilons.push(TheoryAtEpsilon {
            epsilon: eps,
            lambda: geo.lambda(&system.measure, eps),
            lambda_reduced: reduced_lambda(system, cfg, eps)?,
            beta: system.measure.tail_mass(rho_eps)?,
            rho_eps,
            gamma_eps: scales.gamma_eps(eps),
            delta: eps.powf(cfg.shrink_exponent),
        });
    }
    let generator = generator(system)?;
    let stationary = generator.as_ref().map(|g| g.stationary());
    Ok(TheorySummary {
        system: cfg.preset.clone().filter(|_| cfg.system.is_none()).unwrap_or_else(|| "custom".into()),
        alpha: system.measure.alpha(),
        scales,
        exit_mass: geo.exit_mass(&system.measure),
        stable_states: system.stable_states().into_iter().map(|s| s.into_coeffs()).collect(),
        epsilons,
        generator,
        stationary,
    })
}
