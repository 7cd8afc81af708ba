//! Acceptance suite. Every criterion prints one `PASS` or `FAIL` line; the
//! process exits with status 1 if any criterion fails.
//!
//! Run alone with `cargo test --release -p levyexit-core --test acceptance`.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use levyexit_core::experiments::{
    run_exit_campaign, run_locus_campaign, run_metastability, run_models_check, run_probe, theory_summary,
    CampaignConfig, ExitCampaign, System, SystemSpec,
};
use levyexit_core::spectral::{
    evolve_deterministic, find_fixed_points, BasinClassifier, Domain, JumpCheck, LevelSet, Stability,
};
use levyexit_core::theory::{choose_scales, ExitGeometry, RayOptions};
use levyexit_core::{Coefficient, Galerkin, HilbertVector, LevyMeasure, Nonlinearity, ReducedDomain, ReductionLevel, SlowVariation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_611;

struct Report {
    failures: usize,
}

impl Report {
    fn record(&mut self, name: &str, outcome: Result<String, String>) {
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                self.failures += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
}

fn verdict(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn exit_scaling(c: &ExitCampaign) -> Result<String, String> {
    let s = &c.summary;
    let fit = s.slope.as_ref().ok_or("no slope fit")?;
    let alpha = s.theory.alpha;
    let normalized: Vec<f64> = s.per_epsilon.iter().map(|e| e.normalized_mean).collect();
    let ok = (fit.slope - alpha).abs() <= 0.15
        && normalized.iter().all(|m| (0.8..=1.25).contains(m))
        && s.valid;
    verdict(
        ok,
        format!(
            "slope {:.4} ± {:.4} (target {alpha} ± 0.15), lambda E[tau] {normalized:.4?}, valid {}",
            fit.slope, fit.slope_se, s.valid
        ),
    )
}

fn exit_law(c: &ExitCampaign, eps: f64) -> Result<String, String> {
    let at = c
        .summary
        .per_epsilon
        .iter()
        .find(|e| e.theory.epsilon == eps)
        .ok_or_else(|| format!("no results at epsilon {eps}"))?;
    let ks = at.ks.as_ref().ok_or("no KS result")?;
    let mut detail = format!("KS D = {:.4}, p = {:.4}", ks.statistic, ks.p_value);
    let mut ok = ks.p_value >= 0.01;
    for m in &at.moments {
        let within = (m.value - m.exp1_reference).abs() <= 3.0 * m.std_error;
        ok &= within;
        detail += &format!(
            "; moment {} = {:.4} ± {:.4} vs {}",
            m.order, m.value, m.std_error, m.exp1_reference
        );
    }
    ok &= at.moments.len() == 3;
    verdict(ok, detail)
}

fn coupling(c: &ExitCampaign) -> Result<String, String> {
    let per = &c.summary.per_epsilon;
    let rates: Vec<(f64, f64)> = per.iter().map(|e| (e.agreement_rate, e.agreement_se)).collect();
    let monotone = rates
        .windows(2)
        .all(|w| w[1].0 >= w[0].0 - 2.0 * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt());
    let last = rates.last().ok_or("empty grid")?.0;
    verdict(monotone && last > 0.9, format!("agreement (rate, se) {rates:.4?}"))
}

fn locus() -> Result<String, String> {
    let cfg = CampaignConfig::for_preset("linear_heat_rank_one", vec![0.2, 0.1, 0.05], 2000, SEED + 1)
        .map_err(|e| e.to_string())?;
    let (s, _) = run_locus_campaign(&cfg).map_err(|e| e.to_string())?;
    let set = s.sets.first().ok_or("no locus set")?;
    let freqs: Vec<f64> = set.per_epsilon.iter().map(|f| f.frequency).collect();
    let distances: Vec<f64> = s.distances.iter().map(|d| d.mean).collect();
    let ok = freqs.iter().all(|f| (f - 0.5).abs() <= 0.05) && s.distance_decreasing;
    verdict(
        ok,
        format!(
            "P(exit in {}) {freqs:.4?} (theory {:.4}), L1 distance {distances:.4?}",
            set.name, set.theory_ratio
        ),
    )
}

fn models() -> Result<String, String> {
    let mut cfg = CampaignConfig::for_preset("single_mode_oracle", vec![0.025], 100, SEED + 2)
        .map_err(|e| e.to_string())?;
    cfg.models.streams = 100_000;
    let s = run_models_check(&cfg).map_err(|e| e.to_string())?;
    let detail = s
        .checks
        .iter()
        .map(|c| {
            format!(
                "eps {}: chi2 p = {:.4} (dof {}), KS p = {:.4}",
                c.epsilon, c.chi_square.p_value, c.chi_square.dof, c.ks.p_value
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    verdict(s.passed, detail)
}

fn probe() -> Result<String, String> {
    let mut cfg = CampaignConfig::for_preset("chafee_infante_mult", vec![0.2, 0.1, 0.05], 100, SEED + 3)
        .map_err(|e| e.to_string())?;
    cfg.probe.replications = 2000;
    let s = run_probe(&cfg).map_err(|e| e.to_string())?;
    let p: Vec<f64> = s.per_epsilon.iter().map(|a| a.probability).collect();
    let non_increasing = p.windows(2).all(|w| w[1] <= w[0]);
    let (first, last) = (p[0], p[p.len() - 1]);
    verdict(
        non_increasing && last < first && last < 0.05,
        format!("exceedance probabilities {p:.4?} over epsilon {:?}", cfg.epsilons),
    )
}

fn metastability() -> Result<String, String> {
    let mut cfg = CampaignConfig::for_preset("chafee_infante_mult", vec![0.2, 0.1], 100, SEED + 4)
        .map_err(|e| e.to_string())?;
    cfg.metastable.target_transitions = 2000;
    let s = run_metastability(&cfg).map_err(|e| e.to_string())?;
    let g = s.theory.generator.as_ref().ok_or("no generator")?;
    let at = s.per_epsilon.last().ok_or("empty grid")?;
    let (up, down) = (at.empirical_generator[0][1], at.empirical_generator[1][0]);
    let (g01, g10) = (g.entries[0][1], g.entries[1][0]);
    let mutual = (up - down).abs() / (0.5 * (up + down));
    let dev01 = (up - g01).abs() / g01;
    let dev10 = (down - g10).abs() / g10;
    verdict(
        mutual <= 0.10 && dev01 <= 0.20 && dev10 <= 0.20,
        format!(
            "eps {}: rates {up:.5} / {down:.5}, generator {g01:.5} / {g10:.5}, \
             mutual {mutual:.4}, vs generator {dev01:.4} / {dev10:.4}, counts {:?}",
            at.epsilon, at.counts
        ),
    )
}

fn oracle_rate() -> Result<String, String> {
    let cfg = CampaignConfig::for_preset("single_mode_oracle", vec![0.2, 0.1, 0.05, 0.025, 0.01], 100, 0)
        .map_err(|e| e.to_string())?;
    let sys = System::build(&cfg.system_spec().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let t = theory_summary(&cfg, &sys).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for at in &t.epsilons {
        let exact = at.epsilon.powf(1.5) / 1.5;
        worst = worst.max((at.lambda - exact).abs() / exact);
    }
    // The same identity for a measure built directly, away from the presets.
    let measure = LevyMeasure::symmetric(1.2, &[HilbertVector::unit_mode(3, 2)], 1.0, SlowVariation::Constant)
        .map_err(|e| e.to_string())?;
    let domain = Domain::ball(HilbertVector::zeros(3), 2.0).map_err(|e| e.to_string())?;
    let geo = ExitGeometry::new(
        &measure,
        &Coefficient::Additive,
        &HilbertVector::zeros(3),
        |x| domain.contains(x),
        &RayOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    for eps in [0.3f64, 0.01] {
        let exact = 2.0 * eps.powf(1.2) * 2f64.powf(-1.2) / 1.2;
        worst = worst.max((geo.lambda(&measure, eps) - exact).abs() / exact);
    }
    verdict(worst <= 1e-9, format!("worst relative error {worst:.3e}"))
}

fn scales() -> Result<String, String> {
    let mut checked = 0;
    for a in [0.3, 0.5, 0.8, 1.0, 1.2, 1.5, 1.9] {
        for q in [1.0, 1.5, 2.0, 4.0] {
            for margin in [0.5, 0.8, 0.99] {
                let s = choose_scales(a, q, margin).map_err(|e| format!("alpha {a}, q {q}: {e}"))?;
                let (g, r) = (s.gamma_star, s.rho_star);
                let exact = g > 0.0
                    && r < 1.0
                    && (2.0 * q + 3.0) * g + (1.0 + a) * r < 1.0
                    && g < r
                    && g / a + 3.0 * r < 1.0;
                if !exact {
                    return Err(format!("alpha {a}, q {q}, margin {margin}: gamma {g}, rho {r}"));
                }
                checked += 1;
            }
        }
    }
    let s = choose_scales(1.5, 1.0, 0.8).map_err(|e| e.to_string())?;
    verdict(
        s.rho_star == 0.2 && s.gamma_star == 0.05,
        format!("{checked} parameter sets satisfy all inequalities; alpha 1.5, q 1: gamma {}, rho {}", s.gamma_star, s.rho_star),
    )
}

fn amplitude() -> Result<String, String> {
    let g = Galerkin::new(1, Nonlinearity::chafee_infante(2.0 * std::f64::consts::PI.powi(2)).unwrap())
        .map_err(|e| e.to_string())?;
    let fps = find_fixed_points(&g).map_err(|e| e.to_string())?;
    let plus = fps
        .iter()
        .find(|f| f.stability == Stability::Stable && f.state.coeffs()[0] > 0.0)
        .ok_or("no positive stable state")?;
    let target = (2.0f64 / 3.0).sqrt();
    let newton = (plus.state.eval(0.5) - target).abs();
    let flowed = evolve_deterministic(&g, &HilbertVector::mode(1, 1, 0.2), 30.0, 1e-2).map_err(|e| e.to_string())?;
    let flow = (flowed.eval(0.5) - target).abs();
    verdict(
        newton <= 1e-8 && flow <= 1e-8,
        format!("amplitude errors: fixed point {newton:.2e}, long-time flow {flow:.2e}"),
    )
}

fn random_point(rng: &mut ChaCha8Rng, center: &HilbertVector, max_radius: f64) -> HilbertVector {
    let n = center.modes();
    let raw: Vec<f64> = (0..n).map(|k| rng.random_range(-1.0..1.0) / (k + 1) as f64).collect();
    let dir = HilbertVector::new(raw).expect("finite");
    let dir = dir.scaled(1.0 / dir.h_norm());
    let mut x = center.clone();
    x.axpy(max_radius * rng.random::<f64>(), &dir);
    x
}

fn nesting_violations(
    reduced: &ReducedDomain,
    center: &HilbertVector,
    max_radius: f64,
    points: usize,
    seed: u64,
) -> Result<(usize, [usize; 3]), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = [ReductionLevel::One, ReductionLevel::Two, ReductionLevel::Three].map(|l| reduced.at_level(l));
    let mut violations = 0;
    let mut members = [0; 3];
    for _ in 0..points {
        let x = random_point(&mut rng, center, max_radius);
        let mut inside = [false; 3];
        for (i, d) in levels.iter().enumerate() {
            inside[i] = d.contains(&x).map_err(|e| e.to_string())?;
            members[i] += inside[i] as usize;
        }
        if (inside[2] && !inside[1]) || (inside[1] && !inside[0]) {
            violations += 1;
        }
    }
    Ok((violations, members))
}

fn jump_marks(measure: &LevyMeasure, eps: f64) -> Vec<HilbertVector> {
    let mut marks = Vec::new();
    for atom in measure.atoms() {
        for r in [0.5, 2.0, 8.0] {
            marks.push(atom.direction.scaled(eps * r));
        }
    }
    marks
}

fn nesting() -> Result<String, String> {
    let points = 500;
    let mut detail = Vec::new();
    let mut total = 0;

    let spec = SystemSpec::preset("linear_heat_additive").map_err(|e| e.to_string())?;
    let sys = System::build(&spec).map_err(|e| e.to_string())?;
    let eps = 0.2;
    let reduced = ReducedDomain::new(sys.domain.clone(), ReductionLevel::Three, eps * eps)
        .map_err(|e| e.to_string())?
        .with_jump_check(JumpCheck { coefficient: sys.coefficient.clone(), marks: jump_marks(&sys.measure, eps) });
    let (v, m) = nesting_violations(&reduced, &sys.phi, 1.2, points, SEED + 5)?;
    total += v;
    detail.push(format!("ball with level set: {v} violations, members {m:?}"));

    let spec = SystemSpec::preset("chafee_infante_mult").map_err(|e| e.to_string())?;
    let sys = System::build(&spec).map_err(|e| e.to_string())?;
    let reduced = ReducedDomain::new(sys.domain.clone(), ReductionLevel::Three, 0.05)
        .map_err(|e| e.to_string())?
        .with_jump_check(JumpCheck { coefficient: sys.coefficient.clone(), marks: jump_marks(&sys.measure, eps) });
    let (v, m) = nesting_violations(&reduced, &sys.phi, 6.0, points, SEED + 6)?;
    total += v;
    detail.push(format!("basin: {v} violations, members {m:?}"));

    // A level set that is not a ball: single-mode Chafee-Infante basin cut by 𝒰^r.
    let g = Arc::new(
        Galerkin::new(2, Nonlinearity::chafee_infante(2.0 * std::f64::consts::PI.powi(2)).unwrap())
            .map_err(|e| e.to_string())?,
    );
    let fps = find_fixed_points(&g).map_err(|e| e.to_string())?;
    let classifier = Arc::new(BasinClassifier::new(g.clone(), &fps).map_err(|e| e.to_string())?);
    let level = LevelSet::new(g, 1.2).map_err(|e| e.to_string())?;
    let domain = Domain::basin(classifier.clone(), 0, Some(level)).map_err(|e| e.to_string())?;
    let phi = classifier.stable_state(0).ok_or("no stable state")?.clone();
    let measure = LevyMeasure::symmetric(1.5, &[HilbertVector::unit_mode(2, 1)], 1.0, SlowVariation::Constant).map_err(|e| e.to_string())?;
    let reduced = ReducedDomain::new(domain, ReductionLevel::Three, 0.05)
        .map_err(|e| e.to_string())?
        .with_jump_check(JumpCheck { coefficient: Coefficient::NormMultiplicative, marks: jump_marks(&measure, eps) });
    let (v, m) = nesting_violations(&reduced, &phi, 1.5, points, SEED + 7)?;
    total += v;
    detail.push(format!("basin with level set: {v} violations, members {m:?}"));

    verdict(total == 0, format!("{points} points per domain; {}", detail.join("; ")))
}

fn timed(report: &mut Report, name: &str, f: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let outcome = f();
    let secs = start.elapsed().as_secs_f64();
    report.record(name, outcome.map(|d| format!("{d} [{secs:.1} s]")).map_err(|d| format!("{d} [{secs:.1} s]")));
}

fn main() -> ExitCode {
    let mut report = Report { failures: 0 };

    timed(&mut report, "oracle: closed-form exit rate", oracle_rate);
    timed(&mut report, "oracle: scale exponents", scales);
    timed(&mut report, "oracle: single-mode fixed-point amplitude", amplitude);
    timed(&mut report, "oracle: reduced-domain nesting", nesting);
    timed(&mut report, "exact-law exit models", models);

    let start = Instant::now();
    let campaign = CampaignConfig::for_preset("single_mode_oracle", vec![0.1, 0.05, 0.025], 2000, SEED)
        .and_then(|cfg| run_exit_campaign(&cfg));
    let secs = start.elapsed().as_secs_f64();
    match campaign {
        Ok(c) => {
            println!("     (oracle exit campaign: {} trials in {secs:.1} s)", c.records.len());
            report.record("exit-rate scaling", exit_scaling(&c));
            report.record("normalized exit law", exit_law(&c, 0.025));
            report.record("coupling agreement", coupling(&c));
        }
        Err(e) => {
            for name in ["exit-rate scaling", "normalized exit law", "coupling agreement"] {
                report.record(name, Err(format!("campaign failed: {e}")));
            }
        }
    }

    timed(&mut report, "exit locus", locus);
    timed(&mut report, "small-deviation probe", probe);
    timed(&mut report, "metastability", metastability);

    if report.failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", report.failures);
        ExitCode::FAILURE
    }
}
