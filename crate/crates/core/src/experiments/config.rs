//! Campaign configuration: a single versioned JSON document, optionally
//! starting from one of the shipped presets.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficient::Coefficient;
use crate::error::{Error, Result};
use crate::levy::{LevyMeasure, SlowVariation};
use crate::solver::SolverConfig;
use crate::spectral::{
    estimate_kappa0, find_fixed_points, BasinClassifier, Domain, FixedPoint, Galerkin, HilbertVector,
    LevelSet, Nonlinearity, ReducedDomain, ReductionLevel, Stability,
};
use crate::theory::{choose_scales, ScaleParams, DEFAULT_MARGIN};

pub const SCHEMA_VERSION: u32 = 1;
pub const MIN_TRIALS: usize = 100;

pub const PRESET_NAMES: [&str; 4] =
    ["single_mode_oracle", "linear_heat_additive", "linear_heat_rank_one", "chafee_infante_mult"];

/// Reference set `D` of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    /// H-ball; the centre defaults to the origin.
    Ball {
        #[serde(default)]
        center: Option<HilbertVector>,
        radius: f64,
    },
    /// Basin of attraction of the stable state with this index (stable states
    /// are ordered by descending first coefficient).
    Basin { index: usize },
    Whole,
}

/// Deterministic system, noise and reference set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub modes: usize,
    pub nonlinearity: Nonlinearity,
    pub coefficient: Coefficient,
    pub measure: LevyMeasure,
    pub domain: DomainSpec,
    /// Radius `ℛ` of the potential level set `𝒰^ℛ`.
    #[serde(default)]
    pub level_set_radius: Option<f64>,
}

impl SystemSpec {
    pub fn preset(name: &str) -> Result<Self> {
        let unit = |n: usize, k: usize| HilbertVector::unit_mode(n, k);
        let sym = |alpha: f64, dirs: &[HilbertVector], w: f64| {
            LevyMeasure::symmetric(alpha, dirs, w, SlowVariation::Constant)
        };
        let ball = DomainSpec::Ball { center: None, radius: 1.0 };
        match name {
            "single_mode_oracle" => Ok(Self {
                modes: 1,
                nonlinearity: Nonlinearity::Zero,
                coefficient: Coefficient::Additive,
                measure: sym(1.5, &[unit(1, 1)], 0.5)?,
                domain: ball,
                level_set_radius: Some(1.0),
            }),
            "linear_heat_additive" => Ok(Self {
                modes: 8,
                nonlinearity: Nonlinearity::Zero,
                coefficient: Coefficient::Additive,
                measure: sym(1.5, &[unit(8, 1), unit(8, 2)], 0.25)?,
                domain: ball,
                level_set_radius: Some(1.0),
            }),
            "linear_heat_rank_one" => Ok(Self {
                modes: 4,
                nonlinearity: Nonlinearity::Zero,
                coefficient: Coefficient::rank_one(unit(4, 1))?,
                measure: sym(1.5, &[unit(4, 1)], 0.5)?,
                domain: ball,
                level_set_radius: Some(1.0),
            }),
            "chafee_infante_mult" => Ok(Self {
                modes: 8,
                nonlinearity: Nonlinearity::chafee_infante(2.0 * PI * PI)?,
                coefficient: Coefficient::NormMultiplicative,
                measure: sym(1.5, &[unit(8, 1)], 0.5)?,
                domain: DomainSpec::Basin { index: 0 },
                level_set_radius: None,
            }),
            other => Err(Error::Config(format!(
                "unknown preset {other:?}; available: {}",
                PRESET_NAMES.join(", ")
            ))),
        }
    }
}

/// `"auto"` or explicit scale exponents.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "ScalesRepr", into = "ScalesRepr")]
pub enum ScalesSpec {
    #[default]
    Auto,
    Explicit { gamma_star: f64, rho_star: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ScalesRepr {
    Name(String),
    Explicit { gamma_star: f64, rho_star: f64 },
}

impl TryFrom<ScalesRepr> for ScalesSpec {
    type Error = String;
    fn try_from(r: ScalesRepr) -> std::result::Result<Self, String> {
        match r {
            ScalesRepr::Name(s) if s == "auto" => Ok(Self::Auto),
            ScalesRepr::Name(s) => Err(format!("scales must be \"auto\" or an object, got {s:?}")),
            ScalesRepr::Explicit { gamma_star, rho_star } => Ok(Self::Explicit { gamma_star, rho_star }),
        }
    }
}

impl From<ScalesSpec> for ScalesRepr {
    fn from(s: ScalesSpec) -> Self {
        match s {
            ScalesSpec::Auto => Self::Name("auto".into()),
            ScalesSpec::Explicit { gamma_star, rho_star } => Self::Explicit { gamma_star, rho_star },
        }
    }
}

/// The constant `q` entering the scale constraints: either a number, or
/// `q = κ₀ κ + 3` with `κ₀` estimated from the deterministic flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QSpec {
    Value(f64),
    FromKappa0 { kappa: f64 },
}

impl Default for QSpec {
    fn default() -> Self {
        Self::Value(1.0)
    }
}

/// Censoring horizon of exit trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HorizonPolicy {
    /// `multiple / λ_ε`.
    RateMultiple(f64),
    Fixed(f64),
}

impl Default for HorizonPolicy {
    fn default() -> Self {
        Self::RateMultiple(20.0)
    }
}

impl HorizonPolicy {
    pub fn horizon(&self, lambda: f64) -> Result<f64> {
        let h = match *self {
            Self::RateMultiple(k) => k / lambda,
            Self::Fixed(t) => t,
        };
        if h > 0.0 && h.is_finite() {
            Ok(h)
        } else {
            Err(Error::Config(format!("horizon policy {self:?} gives invalid horizon {h} at rate {lambda}")))
        }
    }
}

/// Half-space test set `{x : ⟨⟨x, normal⟩⟩ > offset}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfSpace {
    pub name: String,
    pub normal: HilbertVector,
    pub offset: f64,
}

impl HalfSpace {
    pub fn contains(&self, x: &HilbertVector) -> bool {
        x.h_inner(&self.normal) > self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetastableConfig {
    /// Rescaled horizon `T`; the path runs for `T/ε^α`.
    pub rescaled_horizon: Option<f64>,
    /// Stop once every observed direction has this many transitions.
    pub target_transitions: usize,
    /// Sampling period of the basin index on the rescaled clock.
    pub sample_period: f64,
    /// Real-time period of membership checks while the path is away from
    /// the attractor of its current basin.
    pub check_period: f64,
    /// Independent paths per noise intensity, started alternately in each
    /// basin; the transition target is split among them.
    pub paths: usize,
}

impl Default for MetastableConfig {
    fn default() -> Self {
        Self { rescaled_horizon: None, target_transitions: 2000, sample_period: 0.1, check_period: 0.1, paths: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub replications: usize,
    /// Deviation threshold as a multiple of `γ_ε`.
    pub threshold_factor: f64,
    /// Start point; the domain anchor when absent.
    pub x0: Option<HilbertVector>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { replications: 2000, threshold_factor: 0.5, x0: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    pub streams: usize,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        Self { streams: 100_000 }
    }
}

/// One experiment, fully determined by this document and its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub preset: Option<String>,
    /// Overrides the preset when both are given.
    #[serde(default)]
    pub system: Option<SystemSpec>,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scales: ScalesSpec,
    #[serde(default)]
    pub q: QSpec,
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Exits are recorded against `D₂(ε^s, ℛ)` with this exponent `s`.
    #[serde(default = "default_shrink")]
    pub shrink_exponent: f64,
    #[serde(default)]
    pub horizon: HorizonPolicy,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_significance")]
    pub significance: f64,
    #[serde(default = "default_se_band")]
    pub se_band: f64,
    #[serde(default)]
    pub locus_sets: Vec<HalfSpace>,
    #[serde(default)]
    pub metastable: MetastableConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub models: ModelsConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_trials() -> usize {
    2000
}
fn default_margin() -> f64 {
    DEFAULT_MARGIN
}
fn default_shrink() -> f64 {
    2.0
}
fn default_significance() -> f64 {
    0.01
}
fn default_se_band() -> f64 {
    3.0
}

impl CampaignConfig {
    /// Preset configuration with default knobs.
    pub fn for_preset(name: &str, epsilons: Vec<f64>, trials: usize, seed: u64) -> Result<Self> {
        SystemSpec::preset(name)?;
        let cfg = Self {
            schema_version: SCHEMA_VERSION,
            preset: Some(name.to_string()),
            system: None,
            epsilons,
            trials,
            seed,
            scales: ScalesSpec::Auto,
            q: QSpec::default(),
            margin: DEFAULT_MARGIN,
            shrink_exponent: default_shrink(),
            horizon: HorizonPolicy::default(),
            solver: SolverConfig::default(),
            significance: default_significance(),
            se_band: default_se_band(),
            locus_sets: Vec::new(),
            metastable: MetastableConfig::default(),
            probe: ProbeConfig::default(),
            models: ModelsConfig::default(),
            output_dir: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.preset.is_none() && self.system.is_none() {
            return bad("either a preset or a system block is required".into());
        }
        if let Some(p) = &self.preset {
            SystemSpec::preset(p)?;
        }
        if self.epsilons.is_empty() {
            return bad("the epsilon grid is empty".into());
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return bad("every epsilon must lie in (0, 1)".into());
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return bad("the epsilon grid must be strictly decreasing".into());
        }
        if self.trials < MIN_TRIALS {
            return bad(format!("trials = {} is below the minimum of {MIN_TRIALS}", self.trials));
        }
        if !(self.shrink_exponent > 0.0) {
            return bad("shrink_exponent must be positive".into());
        }
        if !(self.significance > 0.0 && self.significance < 1.0) || !(self.se_band > 0.0) {
            return bad("significance must lie in (0, 1) and se_band must be positive".into());
        }
        if let QSpec::Value(q) = self.q {
            if !(q >= 1.0) {
                return bad(format!("q = {q} must be at least 1"));
            }
        }
        if !(self.metastable.sample_period > 0.0 && self.metastable.check_period > 0.0) {
            return bad("metastable periods must be positive".into());
        }
        if !(self.probe.threshold_factor > 0.0) {
            return bad("probe threshold_factor must be positive".into());
        }
        self.solver.validate()?;
        self.system_spec()?;
        Ok(())
    }

    pub fn system_spec(&self) -> Result<SystemSpec> {
        match (&self.system, &self.preset) {
            (Some(s), _) => Ok(s.clone()),
            (None, Some(p)) => SystemSpec::preset(p),
            (None, None) => Err(Error::Config("either a preset or a system block is required".into())),
        }
    }

    /// Resolved `(γ*, ρ*)` and `q`.
    pub fn scales(&self, system: &System) -> Result<ScaleParams> {
        let alpha = system.measure.alpha();
        let q = match self.q {
            QSpec::Value(q) => q,
            QSpec::FromKappa0 { kappa } => {
                let k0 = system.kappa0()?;
                k0 * kappa + 3.0
            }
        };
        match self.scales {
            ScalesSpec::Auto => choose_scales(alpha, q, self.margin),
            ScalesSpec::Explicit { gamma_star, rho_star } => ScaleParams::new(alpha, q, gamma_star, rho_star),
        }
    }
}

/// A system description turned into solver objects.
#[derive(Debug, Clone)]
pub struct System {
    pub spec: SystemSpec,
    pub galerkin: Arc<Galerkin>,
    pub measure: LevyMeasure,
    pub coefficient: Coefficient,
    pub fixed_points: Vec<FixedPoint>,
    pub classifier: Option<Arc<BasinClassifier>>,
    pub domain: Domain,
    /// Stable state the trials start from.
    pub phi: HilbertVector,
    pub level_set: Option<LevelSet>,
}

impl System {
    pub fn build(spec: &SystemSpec) -> Result<Self> {
        let galerkin = Arc::new(Galerkin::new(spec.modes, spec.nonlinearity.clone())?);
        if spec.measure.modes() != spec.modes {
            return Err(Error::Config(format!(
                "measure directions have {} modes, system has {}",
                spec.measure.modes(),
                spec.modes
            )));
        }
        spec.coefficient.validate()?;
        if let Coefficient::RankOne { direction } = &spec.coefficient {
            if direction.modes() != spec.modes {
                return Err(Error::Config("rank-one direction has the wrong number of modes".into()));
            }
        }
        let fixed_points = find_fixed_points(&galerkin)?;
        let level_set = spec.level_set_radius.map(|r| LevelSet::new(galerkin.clone(), r)).transpose()?;
        let needs_classifier = matches!(spec.domain, DomainSpec::Basin { .. })
            || fixed_points.iter().filter(|p| p.stability == Stability::Stable).count() > 1;
        let classifier = if needs_classifier {
            Some(Arc::new(BasinClassifier::new(galerkin.clone(), &fixed_points)?))
        } else {
            None
        };
        let domain = match &spec.domain {
            DomainSpec::Ball { center, radius } => {
                let c = center.clone().unwrap_or_else(|| HilbertVector::zeros(spec.modes));
                if c.modes() != spec.modes {
                    return Err(Error::Config("ball centre has the wrong number of modes".into()));
                }
                let d = Domain::ball(c, *radius)?;
                match &level_set {
                    Some(ls) => d.with_level_set(ls.clone())?,
                    None => d,
                }
            }
            DomainSpec::Basin { index } => {
                let cl = classifier.clone().expect("classifier built for basin domains");
                Domain::basin(cl, *index, level_set.clone())?
            }
            DomainSpec::Whole => Domain::whole(),
        };
        let phi = match domain.anchor() {
            Some(a) => a.clone(),
            None => fixed_points
                .iter()
                .find(|p| p.stability == Stability::Stable)
                .map(|p| p.state.clone())
                .ok_or(Error::NoFixedPoints)?,
        };
        Ok(Self {
            spec: spec.clone(),
            galerkin,
            measure: spec.measure.clone(),
            coefficient: spec.coefficient.clone(),
            fixed_points,
            classifier,
            domain,
            phi,
            level_set,
        })
    }

    pub fn stable_states(&self) -> Vec<HilbertVector> {
        self.fixed_points
            .iter()
            .filter(|p| p.stability == Stability::Stable)
            .map(|p| p.state.clone())
            .collect()
    }

    /// `D₂(δ, ℛ)` with `δ = ε^s`.
    pub fn reduced_domain(&self, eps: f64, shrink_exponent: f64) -> Result<ReducedDomain> {
        ReducedDomain::new(self.domain.clone(), ReductionLevel::Two, eps.powf(shrink_exponent))
    }

    /// Relaxation-based `κ₀` estimate from points on the unit probe sphere
    /// around the anchor.
    pub fn kappa0(&self) -> Result<f64> {
        let n = self.spec.modes;
        let radius = 0.25;
        let samples: Vec<_> = crate::spectral::probe_directions(n, n.min(3))
            .into_iter()
            .map(|d| {
                let mut x = self.phi.clone();
                x.axpy(radius, &d);
                (x, self.phi.clone())
            })
            .collect();
        let gammas = [1e-1, 1e-2, 1e-3, 1e-4];
        Ok(estimate_kappa0(&self.galerkin, &samples, &gammas, 1e-2, 200.0)?.kappa0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(extra: &str) -> String {
        format!(r#"{{"schema_version":1,"preset":"single_mode_oracle","epsilons":[0.1,0.05]{extra}}}"#)
    }

    #[test]
    fn presets_build() {
        for name in PRESET_NAMES {
            let spec = SystemSpec::preset(name).unwrap();
            let sys = System::build(&spec).unwrap();
            assert!(sys.domain.contains(&sys.phi).unwrap(), "{name}");
        }
        let ci = System::build(&SystemSpec::preset("chafee_infante_mult").unwrap()).unwrap();
        assert!(ci.phi.coeffs()[0] > 0.0);
        assert_eq!(ci.stable_states().len(), 2);
        assert!(matches!(SystemSpec::preset("nope"), Err(Error::Config(_))));
    }

    #[test]
    fn config_parsing_and_validation() {
        let cfg = CampaignConfig::from_json(&minimal("")).unwrap();
        assert_eq!(cfg.trials, 2000);
        assert_eq!(cfg.scales, ScalesSpec::Auto);
        assert_eq!(cfg.horizon, HorizonPolicy::RateMultiple(20.0));
        let cfg = CampaignConfig::from_json(&minimal(
            r#","scales":{"gamma_star":0.05,"rho_star":0.2},"horizon":{"fixed":10.0},"q":{"kappa":1.0}"#,
        ))
        .unwrap();
        assert_eq!(cfg.scales, ScalesSpec::Explicit { gamma_star: 0.05, rho_star: 0.2 });
        assert_eq!(cfg.q, QSpec::FromKappa0 { kappa: 1.0 });
        for bad in [
            minimal(r#","trials":0"#),
            minimal(r#","trials":50"#),
            minimal(r#","scales":"manual""#),
            minimal(r#","unknown_knob":1"#),
            r#"{"schema_version":1,"preset":"single_mode_oracle","epsilons":[0.05,0.1]}"#.into(),
            r#"{"schema_version":2,"preset":"single_mode_oracle","epsilons":[0.1]}"#.into(),
            r#"{"schema_version":1,"preset":"nope","epsilons":[0.1]}"#.into(),
            r#"{"schema_version":1,"epsilons":[0.1]}"#.into(),
        ] {
            assert!(matches!(CampaignConfig::from_json(&bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut cfg = CampaignConfig::for_preset("linear_heat_rank_one", vec![0.2, 0.1], 100, 7).unwrap();
        cfg.system = Some(SystemSpec::preset("linear_heat_rank_one").unwrap());
        cfg.locus_sets.push(HalfSpace { name: "plus".into(), normal: HilbertVector::unit_mode(4, 1), offset: 1.0 });
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(CampaignConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn auto_scales_and_kappa0() {
        let cfg = CampaignConfig::for_preset("single_mode_oracle", vec![0.1], 100, 0).unwrap();
        let sys = System::build(&cfg.system_spec().unwrap()).unwrap();
        let s = cfg.scales(&sys).unwrap();
        assert!((s.rho_star - 0.2).abs() < 1e-15);
        let k0 = sys.kappa0().unwrap();
        // Heat flow on the first mode relaxes at rate π².
        assert!((k0 - 1.0 / (PI * PI)).abs() < 5e-3, "{k0}");
    }
}
