use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::measure::{LevyMeasure, SlowVariation};
use crate::error::{invalid, Error, Result};
use crate::spectral::HilbertVector;

/// A jump of the driving process: radius times the direction of an atom.
/// The stored mark is unscaled, i.e. before multiplication by ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub atom: usize,
    pub radius: f64,
}

impl JumpEvent {
    pub fn mark(&self, measure: &LevyMeasure) -> HilbertVector {
        measure.atoms()[self.atom].direction.scaled(self.radius)
    }
}

fn atom_distribution(measure: &LevyMeasure) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(measure.atoms().iter().map(|a| a.weight))
        .map_err(|e| invalid(format!("atom weights: {e}")))
}

/// Draws `r` on `(lo, hi]` with density proportional to `r^{-α-1} ℓ(r)`.
/// `tail_lo` and `tail_hi` are the radial tails at the endpoints.
fn draw_radius(
    measure: &LevyMeasure,
    rng: &mut ChaCha8Rng,
    lo: f64,
    tail_lo: f64,
    tail_hi: f64,
) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let a = measure.alpha();
    match measure.slow_variation() {
        SlowVariation::Constant if tail_hi == 0.0 => lo * u.powf(-1.0 / a),
        SlowVariation::Constant => {
            let lo_pow = lo.powf(-a);
            let hi_pow = a * tail_hi;
            (hi_pow + u * (lo_pow - hi_pow)).powf(-1.0 / a)
        }
        SlowVariation::Logarithmic => {
            measure.radial_tail_inverse(tail_hi + u * (tail_lo - tail_hi))
        }
    }
}

/// Lazily extended large-jump stream: arrival times are i.i.d. `Exp(β)` with
/// `β = ν(B_ρ^c(0))`, marks follow `ν` restricted to `B_ρ^c(0)`.
///
/// Events are generated on demand and cached, so the solver and an exit model
/// can read the same realisation.
#[derive(Debug, Clone)]
pub struct LargeJumpStream<'a> {
    measure: &'a LevyMeasure,
    threshold: f64,
    rate: f64,
    tail_threshold: f64,
    interarrival: Exp<f64>,
    atoms: WeightedIndex<f64>,
    rng: ChaCha8Rng,
    clock: f64,
    events: Vec<JumpEvent>,
}

impl<'a> LargeJumpStream<'a> {
    pub fn new(measure: &'a LevyMeasure, threshold: f64, rng: ChaCha8Rng) -> Result<Self> {
        if !(threshold > 0.0) {
            return Err(invalid("large-jump threshold must be positive"));
        }
        let rate = measure.tail_mass(threshold)?;
        if !(rate.is_normal() && rate > 0.0) {
            return Err(Error::Underflow(format!(
                "large-jump rate at threshold {threshold:e} is {rate:e}"
            )));
        }
        Ok(Self {
            measure,
            threshold,
            rate,
            tail_threshold: measure.radial_tail(threshold),
            interarrival: Exp::new(rate).map_err(|e| invalid(e.to_string()))?,
            atoms: atom_distribution(measure)?,
            rng,
            clock: 0.0,
            events: Vec::new(),
        })
    }

    pub fn measure(&self) -> &'a LevyMeasure {
        self.measure
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// `β_ε`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    fn draw(&mut self) -> JumpEvent {
        self.clock += self.interarrival.sample(&mut self.rng);
        let atom = self.atoms.sample(&mut self.rng);
        let radius = draw_radius(self.measure, &mut self.rng, self.threshold, self.tail_threshold, 0.0);
        JumpEvent { time: self.clock, atom, radius }
    }

    /// The `k`-th event (0-based).
    pub fn event(&mut self, k: usize) -> JumpEvent {
        while self.events.len() <= k {
            let e = self.draw();
            self.events.push(e);
        }
        self.events[k]
    }

    /// All events with `time < horizon`.
    pub fn until(&mut self, horizon: f64) -> &[JumpEvent] {
        while self.events.last().is_none_or(|e| e.time < horizon) {
            let e = self.draw();
            self.events.push(e);
        }
        let n = self.events.partition_point(|e| e.time < horizon);
        &self.events[..n]
    }
}

/// Collects the large jumps with `time < horizon`.
pub fn sample_large_jumps(
    measure: &LevyMeasure,
    threshold: f64,
    horizon: f64,
    rng: ChaCha8Rng,
) -> Result<Vec<JumpEvent>> {
    if !(horizon > 0.0) {
        return Err(invalid("horizon must be positive"));
    }
    let mut stream = LargeJumpStream::new(measure, threshold, rng)?;
    Ok(stream.until(horizon).to_vec())
}

/// Truncation of the small-jump component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmallJumpConfig {
    /// Simulate the small jumps at all.
    pub enabled: bool,
    /// Explicit inner cutoff; overrides the two rules below.
    pub inner_cutoff: Option<f64>,
    /// Largest admissible dropped second moment.
    pub variance_tolerance: f64,
    /// Largest admissible rate of simulated small jumps per unit time.
    pub max_rate: f64,
}

impl Default for SmallJumpConfig {
    fn default() -> Self {
        Self { enabled: true, inner_cutoff: None, variance_tolerance: 1e-6, max_rate: 500.0 }
    }
}

/// Jumps with radius in `(δ_in, ρ]`, simulated as a compound Poisson process,
/// together with the deterministic compensator drift per unit time.
#[derive(Debug, Clone)]
pub struct SmallJumpStream<'a> {
    measure: &'a LevyMeasure,
    inner: f64,
    outer: f64,
    rate: f64,
    tail_inner: f64,
    tail_outer: f64,
    drift: HilbertVector,
    dropped_variance: f64,
    interarrival: Option<Exp<f64>>,
    atoms: WeightedIndex<f64>,
    rng: ChaCha8Rng,
    clock: f64,
}

impl<'a> SmallJumpStream<'a> {
    pub fn new(
        measure: &'a LevyMeasure,
        outer: f64,
        config: &SmallJumpConfig,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let tail_outer = measure.radial_tail(outer);
        let inner = match config.inner_cutoff {
            Some(d) => {
                if !(d > 0.0) || d >= outer {
                    return Err(invalid(format!(
                        "inner cutoff {d} must lie in (0, {outer})"
                    )));
                }
                d
            }
            None => {
                let by_variance = measure.variance_cutoff(config.variance_tolerance);
                let by_rate = measure
                    .radial_tail_inverse(config.max_rate / measure.total_weight() + tail_outer);
                by_variance.max(by_rate).min(outer)
            }
        };
        let tail_inner = measure.radial_tail(inner);
        let rate = if config.enabled { measure.total_weight() * (tail_inner - tail_outer) } else { 0.0 };
        let mut drift = HilbertVector::zeros(measure.modes());
        if config.enabled && inner < 1.0 && !measure.is_symmetric() {
            let m1 = measure.radial_power_integral(measure.alpha(), inner, 1.0f64.min(outer));
            for atom in measure.atoms() {
                drift.axpy(-atom.weight * m1, &atom.direction);
            }
        }
        let dropped_variance = if config.enabled {
            measure.small_second_moment(inner)
        } else {
            measure.small_second_moment(outer)
        };
        let interarrival = if rate > 0.0 {
            Some(Exp::new(rate).map_err(|e| invalid(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            measure,
            inner,
            outer,
            rate,
            tail_inner,
            tail_outer,
            drift,
            dropped_variance,
            interarrival,
            atoms: atom_distribution(measure)?,
            rng,
            clock: 0.0,
        })
    }

    pub fn inner_cutoff(&self) -> f64 {
        self.inner
    }

    pub fn outer_cutoff(&self) -> f64 {
        self.outer
    }

    /// Intensity of simulated jumps per unit time.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Compensator drift per unit time (unscaled).
    pub fn drift(&self) -> &HilbertVector {
        &self.drift
    }

    /// Second moment of the discarded jumps per unit time.
    pub fn dropped_variance(&self) -> f64 {
        self.dropped_variance
    }

    /// Next jump in time order, or `None` if the stream is empty.
    pub fn next_event(&mut self) -> Option<JumpEvent> {
        let exp = self.interarrival.as_ref()?;
        self.clock += exp.sample(&mut self.rng);
        let atom = self.atoms.sample(&mut self.rng);
        let radius = draw_radius(self.measure, &mut self.rng, self.inner, self.tail_inner, self.tail_outer);
        Some(JumpEvent { time: self.clock, atom, radius })
    }
}

/// Small jumps on `[t0, t1)` relative to a fresh stream started at `t0`,
/// together with the compensator drift accumulated over the interval.
pub fn small_jump_increment(
    measure: &LevyMeasure,
    outer: f64,
    config: &SmallJumpConfig,
    t0: f64,
    t1: f64,
    rng: ChaCha8Rng,
) -> Result<(Vec<JumpEvent>, HilbertVector)> {
    if !(t1 > t0) {
        return Err(invalid("need t1 > t0"));
    }
    let mut stream = SmallJumpStream::new(measure, outer, config, rng)?;
    let mut events = Vec::new();
    while let Some(mut e) = stream.next_event() {
        e.time += t0;
        if e.time >= t1 {
            break;
        }
        events.push(e);
    }
    Ok((events, stream.drift().scaled(t1 - t0)))
}
