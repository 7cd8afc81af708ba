//! Metastability: long paths observed through their basin index on the
//! rescaled clock `t/ε^α`, with empirical transition rates compared to the
//! generator of the limiting Markov chain.
//!
//! Between large jumps the path is integrated in chunks of `check_period`.
//! While the state stays within the safe radius of its current attractor no
//! classification is needed; otherwise the state is classified by the
//! deterministic flow at the end of every chunk and after every large jump.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CampaignConfig, MetastableConfig, System};
use super::theory_summary::{theory_summary, TheorySummary};
use crate::error::{Error, Result};
use crate::levy::{trial_rng, LargeJumpStream, LARGE_JUMP_STREAM, SMALL_JUMP_STREAM};
use crate::solver::{Integrator, PathState, SolverConfig};
use crate::spectral::{BasinClassifier, BasinVerdict, Domain, DomainShape, HilbertVector};

/// Raw observation of one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathObservation {
    /// `counts[i][j]`: transitions from basin `i` to basin `j`.
    pub counts: Vec<Vec<usize>>,
    /// Real time spent in each basin.
    pub occupation: Vec<f64>,
    /// Basin index at the sample times `k · sample_period` (rescaled clock).
    pub samples: Vec<usize>,
    pub real_time: f64,
    pub large_jumps: usize,
}

impl PathObservation {
    fn empty(states: usize) -> Self {
        Self {
            counts: vec![vec![0; states]; states],
            occupation: vec![0.0; states],
            samples: Vec::new(),
            real_time: 0.0,
            large_jumps: 0,
        }
    }

    /// Merge of independent paths; associative and commutative on the
    /// aggregates (sample series are concatenated).
    pub fn merge(mut self, other: &Self) -> Self {
        for (r, o) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in r.iter_mut().zip(o) {
                *a += b;
            }
        }
        for (a, b) in self.occupation.iter_mut().zip(&other.occupation) {
            *a += b;
        }
        self.samples.extend_from_slice(&other.samples);
        self.real_time += other.real_time;
        self.large_jumps += other.large_jumps;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetastableAtEpsilon {
    pub epsilon: f64,
    pub paths: usize,
    pub counts: Vec<Vec<usize>>,
    /// Rescaled time spent in each basin.
    pub rescaled_occupation: Vec<f64>,
    /// Sampled occupancy fractions.
    pub occupancy: Vec<f64>,
    /// Transitions per unit rescaled time, off-diagonal; diagonal is minus
    /// the row sum.
    pub empirical_generator: Vec<Vec<f64>>,
    /// Relative standard errors of the off-diagonal rates (Poisson counts).
    pub relative_se: Vec<Vec<f64>>,
    pub real_time: f64,
    pub large_jumps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetastableSummary {
    pub per_epsilon: Vec<MetastableAtEpsilon>,
    pub theory: TheorySummary,
}

/// Simulates one path from stable state `start` until every transition
/// direction has `target` events or the real time reaches `max_time`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_path(
    system: &System,
    classifier: &BasinClassifier,
    safe_radii: &[f64],
    solver: &SolverConfig,
    eps: f64,
    rho: f64,
    meta: &MetastableConfig,
    start: usize,
    target: usize,
    max_time: f64,
    seed: u64,
    path_id: u64,
) -> Result<PathObservation> {
    let states = classifier.stable_states().len();
    let alpha = system.measure.alpha();
    let mut obs = PathObservation::empty(states);
    let phi = classifier
        .stable_state(start)
        .ok_or_else(|| Error::InvalidInput(format!("no stable state {start}")))?
        .clone();
    let mut integ = Integrator::new(
        &system.galerkin,
        &system.coefficient,
        Some(&system.measure),
        eps,
        rho,
        solver,
        trial_rng(seed, path_id, SMALL_JUMP_STREAM),
    )?;
    let mut large = if eps > 0.0 {
        Some(LargeJumpStream::new(&system.measure, rho, trial_rng(seed, path_id, LARGE_JUMP_STREAM))?)
    } else {
        None
    };
    let mut state = PathState::new(phi, false);
    let mut label = start;
    let mut entered = 0.0;
    let sample_dt = if eps > 0.0 { meta.sample_period * eps.powf(alpha) } else { meta.sample_period };
    let mut next_sample = 0.0;
    let mut k = 0usize;
    let done = |o: &PathObservation| {
        (0..states).all(|i| (0..states).all(|j| i == j || o.counts[i][j] >= target))
    };
    let reclassify = |x: &HilbertVector, label: usize| -> Result<usize> {
        let anchor = classifier.stable_state(label).expect("label is a stable index");
        if x.h_distance(anchor) < safe_radii[label] {
            return Ok(label);
        }
        Ok(match classifier.classify(x)? {
            BasinVerdict::Stable(j) => j,
            BasinVerdict::Separatrix => label,
        })
    };
    while state.t < max_time && !done(&obs) {
        let next_jump = match large.as_mut() {
            Some(s) => s.event(k).time,
            None => f64::INFINITY,
        };
        let stop = (state.t + meta.check_period).min(next_jump).min(max_time);
        integ.advance(&mut state, stop, |_| Ok(true))?;
        if stop == next_jump {
            let s = large.as_mut().expect("jump times come from the stream");
            let mark = s.event(k).mark(&system.measure);
            integ.apply_large_jump(&mut state, &mark);
            k += 1;
        }
        let new_label = reclassify(&state.x, label)?;
        while next_sample <= state.t {
            obs.samples.push(new_label);
            next_sample += sample_dt;
        }
        if new_label != label {
            obs.counts[label][new_label] += 1;
            obs.occupation[label] += state.t - entered;
            entered = state.t;
            label = new_label;
        }
    }
    obs.occupation[label] += state.t - entered;
    obs.real_time = state.t;
    obs.large_jumps = k;
    Ok(obs)
}

/// Safe radius of every basin (see [`Domain::basin`]).
pub fn basin_safe_radii(classifier: &std::sync::Arc<BasinClassifier>) -> Result<Vec<f64>> {
    (0..classifier.stable_states().len())
        .map(|i| {
            let d = Domain::basin(classifier.clone(), i, None)?;
            Ok(match d.shape() {
                DomainShape::Basin { safe_radius, .. } => *safe_radius,
                _ => unreachable!("basin domain has a basin shape"),
            })
        })
        .collect()
}

pub fn run_metastability(cfg: &CampaignConfig) -> Result<MetastableSummary> {
    cfg.validate()?;
    let system = System::build(&cfg.system_spec()?)?;
    let classifier = system
        .classifier
        .clone()
        .filter(|c| c.stable_states().len() >= 2)
        .ok_or_else(|| Error::Config("metastability needs a system with at least two stable states".into()))?;
    let theory = theory_summary(cfg, &system)?;
    let generator = theory.generator.clone().ok_or_else(|| Error::Config("no generator available".into()))?;
    let states = classifier.stable_states().len();
    let safe = basin_safe_radii(&classifier)?;
    let meta = &cfg.metastable;
    let paths = meta.paths.max(1);
    let alpha = system.measure.alpha();
    let min_rate = generator
        .entries
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().enumerate().filter(move |(j, _)| *j != i).map(|(_, v)| *v))
        .fold(f64::INFINITY, f64::min);
    let mut per_epsilon = Vec::new();
    let mut solver = cfg.solver.clone();
    solver.refine_exits = false;
    for (ei, at) in theory.epsilons.iter().enumerate() {
        let eps = at.epsilon;
        let scale = eps.powf(alpha);
        let target = meta.target_transitions.div_ceil(paths);
        let max_time = match meta.rescaled_horizon {
            Some(t) => t / scale / paths as f64,
            None if min_rate > 0.0 => 50.0 * target as f64 / (min_rate * scale),
            None => return Err(Error::ZeroExitRate),
        };
        let obs: Vec<PathObservation> = (0..paths)
            .into_par_iter()
            .map(|p| {
                let id = (ei * paths + p) as u64;
                simulate_path(
                    &system,
                    &classifier,
                    &safe,
                    &solver,
                    eps,
                    at.rho_eps,
                    meta,
                    p % states,
                    target,
                    max_time,
                    cfg.seed,
                    id,
                )
            })
            .collect::<Result<_>>()?;
        let total = obs.iter().skip(1).fold(obs[0].clone(), |acc, o| acc.merge(o));
        per_epsilon.push(aggregate(eps, scale, paths, &total));
    }
    Ok(MetastableSummary { per_epsilon, theory })
}

fn aggregate(eps: f64, scale: f64, paths: usize, o: &PathObservation) -> MetastableAtEpsilon {
    let n = o.occupation.len();
    let rescaled: Vec<f64> = o.occupation.iter().map(|t| t * scale).collect();
    let mut generator = vec![vec![0.0; n]; n];
    let mut rel = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (0..n).filter(|j| *j != i) {
            generator[i][j] = if rescaled[i] > 0.0 { o.counts[i][j] as f64 / rescaled[i] } else { f64::NAN };
            rel[i][j] = 1.0 / (o.counts[i][j] as f64).sqrt();
        }
        generator[i][i] = -(0..n).filter(|j| *j != i).map(|j| generator[i][j]).sum::<f64>();
    }
    let mut occupancy = vec![0.0; n];
    for s in &o.samples {
        occupancy[*s] += 1.0;
    }
    let m = o.samples.len().max(1) as f64;
    occupancy.iter_mut().for_each(|v| *v /= m);
    MetastableAtEpsilon {
        epsilon: eps,
        paths,
        counts: o.counts.clone(),
        rescaled_occupation: rescaled,
        occupancy,
        empirical_generator: generator,
        relative_se: rel,
        real_time: o.real_time,
        large_jumps: o.large_jumps,
    }
}
