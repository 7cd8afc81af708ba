//! Jump-adapted exponential-Euler integrator for the Lévy-perturbed equation
//! and first-exit trials.
//!
//! Between large jumps the state follows a uniform grid of step `dt`, with the
//! linear part integrated exactly and the reaction frozen over each piece.
//! Small jumps are applied at their exact arrival times inside a step; large
//! jumps restart the grid at the jump time.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coefficient::Coefficient;
use crate::error::{invalid, Result};
use crate::levy::{JumpEvent, LargeJumpStream, LevyMeasure, SmallJumpConfig, SmallJumpStream};
use crate::spectral::galerkin::check_blow_up;
use crate::spectral::vector::{h_distance, h_norm_sq};
use crate::spectral::{
    Galerkin, HilbertVector, LevelSet, ReducedDomain, Workspace, DEFAULT_BLOW_UP_CAP,
};

/// Largest admissible base step.
pub const MAX_DT: f64 = 1e-2;
const STIFFNESS_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub blow_up_cap: f64,
    /// Bisect continuous exits inside the step where they were detected.
    pub refine_exits: bool,
    pub refine_tol: f64,
    /// Track the stochastic convolution `Ψ`.
    pub track_convolution: bool,
    pub small_jumps: SmallJumpConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: MAX_DT,
            blow_up_cap: DEFAULT_BLOW_UP_CAP,
            refine_exits: true,
            refine_tol: 1e-4,
            track_convolution: false,
            small_jumps: SmallJumpConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(invalid(format!("dt must lie in (0, {MAX_DT}], got {}", self.dt)));
        }
        if !(self.blow_up_cap > 0.0) || !(self.refine_tol > 0.0) {
            return Err(invalid("blow-up cap and refinement tolerance must be positive"));
        }
        Ok(())
    }
}

/// State of a sample path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub t: f64,
    pub x: HilbertVector,
    /// Stochastic convolution of the small-jump noise, when tracked.
    pub psi: Option<HilbertVector>,
    /// The path has left the level set.
    pub sigma1: bool,
    /// The stochastic convolution has left the level set.
    pub sigma2: bool,
}

impl PathState {
    pub fn new(x: HilbertVector, track_convolution: bool) -> Self {
        let psi = track_convolution.then(|| HilbertVector::zeros(x.modes()));
        Self { t: 0.0, x, psi, sigma1: false, sigma2: false }
    }
}

#[derive(Debug, Clone, Copy)]
enum Mark {
    Atom(usize, f64),
    Injected(usize),
}

#[derive(Debug, Clone, Copy)]
struct SmallEvent {
    time: f64,
    mark: Mark,
}

/// Integrator of one sample path driven by the small-jump component.
#[derive(Debug, Clone)]
pub struct Integrator<'a> {
    galerkin: &'a Galerkin,
    coefficient: &'a Coefficient,
    measure: Option<&'a LevyMeasure>,
    eps: f64,
    config: &'a SolverConfig,
    small: Option<SmallJumpStream<'a>>,
    injected: Vec<(f64, HilbertVector)>,
    injected_next: usize,
    pending: Option<SmallEvent>,
    drift: Vec<f64>,
    has_drift: bool,
    ws: Workspace,
    psi_forcing: Vec<f64>,
    step_events: Vec<SmallEvent>,
}

impl<'a> Integrator<'a> {
    /// `threshold` is the large-jump cutoff `ρ^ε`; jumps below it are the
    /// small-jump component simulated here. Without a measure, or with
    /// `eps == 0`, no random small jumps are drawn.
    pub fn new(
        galerkin: &'a Galerkin,
        coefficient: &'a Coefficient,
        measure: Option<&'a LevyMeasure>,
        eps: f64,
        threshold: f64,
        config: &'a SolverConfig,
        small_rng: ChaCha8Rng,
    ) -> Result<Self> {
        config.validate()?;
        if !(eps >= 0.0) {
            return Err(invalid("noise intensity must be nonnegative"));
        }
        let small = match measure {
            Some(m) if eps > 0.0 && config.small_jumps.enabled => {
                Some(SmallJumpStream::new(m, threshold, &config.small_jumps, small_rng)?)
            }
            _ => None,
        };
        let drift: Vec<f64> = match &small {
            Some(s) => s.drift().coeffs().iter().map(|d| eps * d).collect(),
            None => vec![0.0; galerkin.modes()],
        };
        let has_drift = drift.iter().any(|d| *d != 0.0);
        let mut me = Self {
            galerkin,
            coefficient,
            measure,
            eps,
            config,
            small,
            injected: Vec::new(),
            injected_next: 0,
            pending: None,
            drift,
            has_drift,
            ws: Workspace::new(galerkin),
            psi_forcing: vec![0.0; galerkin.modes()],
            step_events: Vec::new(),
        };
        me.refill();
        Ok(me)
    }

    /// Replaces the random small jumps by the given `(time, unscaled mark)`
    /// list.
    pub fn with_small_jumps(mut self, mut jumps: Vec<(f64, HilbertVector)>) -> Self {
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        self.small = None;
        self.injected = jumps;
        self.injected_next = 0;
        self.pending = None;
        self.refill();
        self
    }

    /// Second moment per unit time of the discarded small jumps.
    pub fn dropped_variance(&self) -> f64 {
        self.small.as_ref().map_or(0.0, |s| s.dropped_variance())
    }

    pub fn small_jump_rate(&self) -> f64 {
        self.small.as_ref().map_or(0.0, |s| s.rate())
    }

    fn refill(&mut self) {
        if self.pending.is_some() {
            return;
        }
        if let Some(s) = self.small.as_mut() {
            self.pending = s.next_event().map(|e| SmallEvent { time: e.time, mark: Mark::Atom(e.atom, e.radius) });
        } else if self.injected_next < self.injected.len() {
            let k = self.injected_next;
            self.injected_next += 1;
            self.pending = Some(SmallEvent { time: self.injected[k].0, mark: Mark::Injected(k) });
        }
    }

    /// Moves the small jumps with `time < t_end` into the step buffer.
    fn collect_step_events(&mut self, t_end: f64) {
        self.step_events.clear();
        while let Some(e) = self.pending {
            if e.time >= t_end {
                break;
            }
            self.step_events.push(e);
            self.pending = None;
            self.refill();
        }
    }

    fn apply_small(&self, c: &mut [f64], psi: Option<&mut Vec<f64>>, mark: Mark) {
        let (dir, scale): (&[f64], f64) = match mark {
            Mark::Atom(i, r) => {
                let m = self.measure.expect("atom marks come from a measure");
                (m.atoms()[i].direction.coeffs(), r * self.eps)
            }
            Mark::Injected(k) => (self.injected[k].1.coeffs(), self.eps),
        };
        if let Some(p) = psi {
            self.coefficient.add_into(c, dir, scale, p);
        }
        self.coefficient.jump_in_place(c, dir, scale);
    }

    /// Exponential-Euler flow over `h` with frozen reaction and compensator
    /// forcing, substepped when the reaction is stiff.
    fn flow(&mut self, c: &mut [f64], mut psi: Option<&mut Vec<f64>>, h: f64) {
        let mut remaining = h;
        while remaining > 0.0 {
            let stiff = self.galerkin.reaction(c, &mut self.ws.values, &mut self.ws.forcing);
            if self.has_drift {
                self.coefficient.add_into(c, &self.drift, 1.0, &mut self.ws.forcing);
            }
            let sub = if stiff * remaining > STIFFNESS_FRACTION { STIFFNESS_FRACTION / stiff } else { remaining };
            if let Some(p) = psi.as_deref_mut() {
                if self.has_drift {
                    self.psi_forcing.iter_mut().for_each(|v| *v = 0.0);
                    self.coefficient.add_into(c, &self.drift, 1.0, &mut self.psi_forcing);
                    self.galerkin.propagate(p, &self.psi_forcing, sub);
                } else {
                    self.galerkin.semigroup(p, sub);
                }
            }
            self.galerkin.propagate(c, &self.ws.forcing, sub);
            remaining -= sub;
            if remaining < 1e-15 * h {
                break;
            }
        }
    }

    /// Replays the buffered step from `(c, psi)` at time `t0` up to `t0 + h`.
    ///
    /// When the reaction is not stiff over the step, the forcing evaluated at
    /// the start of the step is reused for every piece between small jumps.
    fn replay(&mut self, c: &mut [f64], mut psi: Option<&mut Vec<f64>>, t0: f64, h: f64) {
        let events = std::mem::take(&mut self.step_events);
        let mut t = t0;
        let end = t0 + h;
        let stiff = self.galerkin.reaction(c, &mut self.ws.values, &mut self.ws.forcing);
        if stiff * h <= STIFFNESS_FRACTION {
            if self.has_drift {
                self.coefficient.add_into(c, &self.drift, 1.0, &mut self.ws.forcing);
                if psi.is_some() {
                    self.psi_forcing.iter_mut().for_each(|v| *v = 0.0);
                    self.coefficient.add_into(c, &self.drift, 1.0, &mut self.psi_forcing);
                }
            }
            for e in events.iter().filter(|e| e.time < end) {
                self.frozen_piece(c, psi.as_deref_mut(), e.time - t);
                self.apply_small(c, psi.as_deref_mut(), e.mark);
                t = e.time;
            }
            self.frozen_piece(c, psi, end - t);
        } else {
            for e in events.iter().filter(|e| e.time < end) {
                self.flow(c, psi.as_deref_mut(), e.time - t);
                self.apply_small(c, psi.as_deref_mut(), e.mark);
                t = e.time;
            }
            self.flow(c, psi, end - t);
        }
        self.step_events = events;
    }

    fn frozen_piece(&self, c: &mut [f64], psi: Option<&mut Vec<f64>>, h: f64) {
        if h <= 0.0 {
            return;
        }
        if let Some(p) = psi {
            if self.has_drift {
                self.galerkin.propagate(p, &self.psi_forcing, h);
            } else {
                self.galerkin.semigroup(p, h);
            }
        }
        self.galerkin.propagate(c, &self.ws.forcing, h);
    }

    /// Integrates from `state.t` to `t_end` on the grid `state.t + k·dt`.
    ///
    /// `inside` is evaluated at every grid node; the first node where it is
    /// false stops the integration and the exit time is returned (refined by
    /// bisection on the step if configured), with `state` at that time.
    pub fn advance<F>(&mut self, state: &mut PathState, t_end: f64, mut inside: F) -> Result<Option<f64>>
    where
        F: FnMut(&HilbertVector) -> Result<bool>,
    {
        self.advance_observed(state, t_end, &mut inside, None)
    }

    /// As [`advance`](Self::advance), also raising the `σ` flags against `level_set`.
    pub fn advance_observed<F>(
        &mut self,
        state: &mut PathState,
        t_end: f64,
        inside: &mut F,
        level_set: Option<&LevelSet>,
    ) -> Result<Option<f64>>
    where
        F: FnMut(&HilbertVector) -> Result<bool>,
    {
        let dt = self.config.dt;
        let mut c = std::mem::replace(&mut state.x, HilbertVector::zeros(1)).into_coeffs();
        let mut psi = state.psi.take().map(|p| p.into_coeffs());
        let t_start = state.t;
        let mut k = 0usize;
        let result = loop {
            let t0 = state.t;
            if t0 >= t_end {
                break None;
            }
            let t1 = (t_start + (k + 1) as f64 * dt).min(t_end);
            let h = t1 - t0;
            self.collect_step_events(t1);
            let start_c = c.clone();
            let start_psi = psi.clone();
            let before = h_norm_sq(&c);
            self.replay(&mut c, psi.as_mut(), t0, h);
            check_blow_up(before, &c, self.config.blow_up_cap, t1)?;
            state.t = t1;
            k += 1;
            let x = HilbertVector::new(c.clone())?;
            if let Some(ls) = level_set {
                state.sigma1 |= !ls.contains(&x);
                if let Some(p) = &psi {
                    state.sigma2 |= !ls.contains(&HilbertVector::new(p.clone())?);
                }
            }
            if !inside(&x)? {
                if self.config.refine_exits {
                    let (mut lo, mut hi) = (0.0, h);
                    let mut at_hi = (c.clone(), psi.clone());
                    while hi - lo > self.config.refine_tol {
                        let mid = 0.5 * (lo + hi);
                        let mut cm = start_c.clone();
                        let mut pm = start_psi.clone();
                        self.replay(&mut cm, pm.as_mut(), t0, mid);
                        if inside(&HilbertVector::new(cm.clone())?)? {
                            lo = mid;
                        } else {
                            hi = mid;
                            at_hi = (cm, pm);
                        }
                    }
                    c = at_hi.0;
                    psi = at_hi.1;
                    state.t = t0 + hi;
                }
                break Some(state.t);
            }
        };
        state.x = HilbertVector::new(c)?;
        state.psi = psi.map(HilbertVector::new).transpose()?;
        Ok(result)
    }

    /// `x ← x + G(x, ε W)`, instantaneous.
    pub fn apply_large_jump(&self, state: &mut PathState, mark: &HilbertVector) {
        apply_large_jump(self.coefficient, state, mark, self.eps);
    }
}

/// `x ← x + G(x, ε·mark)`.
pub fn apply_large_jump(coefficient: &Coefficient, state: &mut PathState, mark: &HilbertVector, eps: f64) {
    coefficient.jump_in_place(state.x.coeffs_mut(), mark.coeffs(), eps);
}

/// Everything a first-exit trial needs apart from its random streams.
#[derive(Debug, Clone, Copy)]
pub struct TrialSetup<'a> {
    pub galerkin: &'a Galerkin,
    pub measure: &'a LevyMeasure,
    pub coefficient: &'a Coefficient,
    /// Exit is recorded on leaving this set.
    pub domain: &'a ReducedDomain,
    /// Level set against which the `σ` flags are raised.
    pub level_set: Option<&'a LevelSet>,
    pub eps: f64,
    /// Large-jump threshold `ρ^ε`.
    pub threshold: f64,
    pub horizon: f64,
    pub config: &'a SolverConfig,
}

/// Outcome of a first-exit trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Exit time, `None` when censored at the horizon.
    pub tau: Option<f64>,
    /// State at the exit time (or at the horizon when censored).
    pub locus: HilbertVector,
    /// 1-based index of the large jump that caused the exit.
    pub causal_jump: Option<usize>,
    /// Large jumps up to and including the exit time.
    pub jump_count: usize,
    pub sigma1: bool,
    pub sigma2: bool,
}

impl TrialResult {
    pub fn censored(&self) -> bool {
        self.tau.is_none()
    }
}

/// Runs one path from `x0` until it leaves the domain or reaches the horizon.
/// With `eps == 0` the large-jump stream is not consulted.
pub fn run_trial(
    setup: &TrialSetup<'_>,
    x0: &HilbertVector,
    mut large: Option<&mut LargeJumpStream<'_>>,
    small_rng: ChaCha8Rng,
) -> Result<TrialResult> {
    if !(setup.horizon > 0.0 && setup.horizon.is_finite()) {
        return Err(invalid("trial horizon must be positive and finite"));
    }
    if setup.eps > 0.0 && large.is_none() {
        return Err(invalid("a noisy trial needs a large-jump stream"));
    }
    let mut integ = Integrator::new(
        setup.galerkin,
        setup.coefficient,
        Some(setup.measure),
        setup.eps,
        setup.threshold,
        setup.config,
        small_rng,
    )?;
    let mut state = PathState::new(x0.clone(), setup.config.track_convolution);
    let domain = setup.domain;
    let mut inside = |x: &HilbertVector| domain.contains(x);
    let mut k = 0usize;
    loop {
        let next: Option<JumpEvent> = match large.as_deref_mut() {
            Some(s) if setup.eps > 0.0 => Some(s.event(k)),
            _ => None,
        };
        let stop = next.map_or(setup.horizon, |e| e.time.min(setup.horizon));
        if let Some(tau) = integ.advance_observed(&mut state, stop, &mut inside, setup.level_set)? {
            return Ok(finish(state, Some(tau), None, k));
        }
        match next {
            Some(e) if e.time < setup.horizon => {
                let mark = e.mark(setup.measure);
                integ.apply_large_jump(&mut state, &mark);
                k += 1;
                if let Some(ls) = setup.level_set {
                    state.sigma1 |= !ls.contains(&state.x);
                }
                if !inside(&state.x)? {
                    return Ok(finish(state, Some(e.time), Some(k), k));
                }
            }
            _ => return Ok(finish(state, None, None, k)),
        }
    }
}

fn finish(state: PathState, tau: Option<f64>, causal_jump: Option<usize>, jump_count: usize) -> TrialResult {
    TrialResult {
        tau,
        locus: state.x,
        causal_jump,
        jump_count,
        sigma1: state.sigma1,
        sigma2: state.sigma2,
    }
}

/// One replication of the small-deviation probe: co-integrates the path
/// driven by the small jumps only and the deterministic flow from `x0` over
/// `[0, t1)` and reports whether their H-distance ever exceeds `threshold`.
#[allow(clippy::too_many_arguments)]
pub fn small_deviation_exceeds(
    galerkin: &Galerkin,
    measure: &LevyMeasure,
    coefficient: &Coefficient,
    config: &SolverConfig,
    eps: f64,
    rho: f64,
    x0: &HilbertVector,
    t1: f64,
    threshold: f64,
    small_rng: ChaCha8Rng,
) -> Result<bool> {
    if eps == 0.0 {
        return Ok(false);
    }
    let mut noisy = Integrator::new(galerkin, coefficient, Some(measure), eps, rho, config, small_rng)?;
    let quiet_cfg = SolverConfig { small_jumps: SmallJumpConfig { enabled: false, ..config.small_jumps.clone() }, ..config.clone() };
    let mut quiet =
        Integrator::new(galerkin, coefficient, None, 0.0, rho, &quiet_cfg, crate::levy::trial_rng(0, 0, 0))?;
    let mut y = PathState::new(x0.clone(), false);
    let mut u = PathState::new(x0.clone(), false);
    let dt = config.dt;
    let mut t = 0.0;
    while t < t1 {
        let next = (t + dt).min(t1);
        noisy.advance(&mut y, next, |_| Ok(true))?;
        quiet.advance(&mut u, next, |_| Ok(true))?;
        if h_distance(y.x.coeffs(), u.x.coeffs()) > threshold {
            return Ok(true);
        }
        t = next;
    }
    Ok(false)
}
