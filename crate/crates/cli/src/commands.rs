use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::Utc;
use levyexit_core::coefficient::{lipschitz_estimate, validate_growth, GrowthReport, LipschitzReport};
use levyexit_core::experiments::metastable::basin_safe_radii;
use levyexit_core::experiments::{
    run_exit_campaign, run_locus_campaign, run_metastability, run_models_check, run_probe, theory_summary,
    write_records, CampaignConfig, System,
};
use levyexit_core::{FixedPoint, Result as CoreResult};
use serde::Serialize;

use crate::manifest::RunManifest;
use crate::Common;

const DEFAULT_OUT_DIR: &str = "levyexit-output";
const VALIDATION_RADIUS: f64 = 2.0;
const VALIDATION_BUDGET: usize = 20_000;

/// Failure reported as one JSON line on stderr.
#[derive(Debug)]
pub struct CliError {
    kind: String,
    message: String,
    code: u8,
}

impl CliError {
    pub fn usage(message: String) -> Self {
        Self { kind: "usage".into(), message, code: 2 }
    }

    fn missing_config(message: String) -> Self {
        Self { kind: "missing_config".into(), message, code: 2 }
    }

    pub fn from_json(e: serde_json::Error) -> Self {
        levyexit_core::Error::from(e).into()
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self { kind: "io".into(), message: format!("{}: {e}", path.display()), code: 1 }
    }

    pub fn exit_code(&self) -> u8 {
        self.code
    }

    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind, "message": self.message }).to_string()
    }
}

impl From<levyexit_core::Error> for CliError {
    fn from(e: levyexit_core::Error) -> Self {
        Self { kind: e.kind().into(), message: e.to_string(), code: 1 }
    }
}

/// A resolved invocation: parsed config, seed and output directory.
pub struct Run {
    command: String,
    config_path: PathBuf,
    pub cfg: CampaignConfig,
    pub out_dir: PathBuf,
    started_at: String,
}

impl Run {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<String, CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, value).map_err(CliError::from_json)?;
        writeln!(out).and_then(|_| out.flush()).map_err(|e| CliError::io(&path, e))?;
        Ok(name.to_string())
    }

    fn write_csv(&self, name: &str, modes: usize, records: &[levyexit_core::experiments::ExitRecord]) -> Result<String, CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        write_records(BufWriter::new(file), modes, records)?;
        Ok(name.to_string())
    }

    pub fn finish(self, outputs: Vec<String>) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            command: self.command.clone(),
            config_path: self.config_path.clone(),
            seed: self.cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: self.started_at.clone(),
            finished_at: Utc::now().to_rfc3339(),
            outputs,
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(manifest)
    }
}

pub fn prepare(command: &str, common: &Common) -> Result<Run, CliError> {
    let started_at = Utc::now().to_rfc3339();
    let path = common
        .config_path()
        .ok_or_else(|| CliError::missing_config("no config file given".into()))?
        .clone();
    if !path.is_file() {
        return Err(CliError::missing_config(format!("config file {} does not exist", path.display())));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let mut cfg = CampaignConfig::from_json(&text)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out_dir = common
        .out_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    Ok(Run { command: command.to_string(), config_path: path, cfg, out_dir, started_at })
}

fn build_system(cfg: &CampaignConfig) -> CoreResult<System> {
    System::build(&cfg.system_spec()?)
}

pub fn theory(run: &Run) -> Result<Vec<String>, CliError> {
    let system = build_system(&run.cfg)?;
    let summary = theory_summary(&run.cfg, &system)?;
    Ok(vec![run.write_json("theory.json", &summary)?])
}

pub fn exit(run: &Run) -> Result<Vec<String>, CliError> {
    let campaign = run_exit_campaign(&run.cfg)?;
    Ok(vec![
        run.write_csv("exit_records.csv", campaign.modes, &campaign.records)?,
        run.write_json("exit_summary.json", &campaign.summary)?,
    ])
}

pub fn locus(run: &Run) -> Result<Vec<String>, CliError> {
    let (summary, campaign) = run_locus_campaign(&run.cfg)?;
    Ok(vec![
        run.write_csv("locus_records.csv", campaign.modes, &campaign.records)?,
        run.write_json("locus_summary.json", &summary)?,
    ])
}

pub fn metastable(run: &Run) -> Result<Vec<String>, CliError> {
    let summary = run_metastability(&run.cfg)?;
    Ok(vec![run.write_json("metastable_summary.json", &summary)?])
}

pub fn models_check(run: &Run) -> Result<Vec<String>, CliError> {
    let summary = run_models_check(&run.cfg)?;
    Ok(vec![run.write_json("models_summary.json", &summary)?])
}

pub fn probe(run: &Run) -> Result<Vec<String>, CliError> {
    let summary = run_probe(&run.cfg)?;
    Ok(vec![run.write_json("probe_summary.json", &summary)?])
}

#[derive(Serialize)]
struct DeterministicReport {
    fixed_points: Vec<FixedPoint>,
    stable_states: Vec<Vec<f64>>,
    /// Radius around each stable state inside which the basin is certain.
    basin_safe_radii: Option<Vec<f64>>,
    start_state: Vec<f64>,
    /// Value of the start state's profile at the midpoint of (0,1).
    start_midpoint: f64,
    kappa0: f64,
}

pub fn deterministic(run: &Run) -> Result<Vec<String>, CliError> {
    let system = build_system(&run.cfg)?;
    let report = DeterministicReport {
        fixed_points: system.fixed_points.clone(),
        stable_states: system.stable_states().into_iter().map(|s| s.into_coeffs()).collect(),
        basin_safe_radii: system.classifier.as_ref().map(basin_safe_radii).transpose()?,
        start_state: system.phi.coeffs().to_vec(),
        start_midpoint: system.phi.eval(0.5),
        kappa0: system.kappa0()?,
    };
    Ok(vec![run.write_json("deterministic.json", &report)?])
}

#[derive(Serialize)]
struct ValidationReport {
    radius: f64,
    samples: usize,
    growth: GrowthReport,
    lipschitz: LipschitzReport,
}

pub fn validate(run: &Run) -> Result<Vec<String>, CliError> {
    let spec = run.cfg.system_spec()?;
    let growth = validate_growth(&spec.coefficient, spec.modes, VALIDATION_RADIUS, VALIDATION_BUDGET, run.cfg.seed)?;
    let lipschitz = lipschitz_estimate(&spec.coefficient, spec.modes, VALIDATION_RADIUS, VALIDATION_BUDGET, run.cfg.seed);
    let report = ValidationReport { radius: VALIDATION_RADIUS, samples: VALIDATION_BUDGET, growth, lipschitz };
    Ok(vec![run.write_json("validate.json", &report)?])
}
