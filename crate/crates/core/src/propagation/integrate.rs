use serde::Serialize;

use super::{direction, momentum_hat, Model, PhotonState};
use crate::error::{Error, Result};
use crate::fermat::IndexField;
use crate::linalg::Vec3;
use crate::orbits::OrbitInvariants;

/// Fixed-step RK4 settings; `step` and `max_len` are Euclidean arc lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationSettings {
    pub step: f64,
    pub max_len: f64,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self { step: 1e-2, max_len: 10.0 }
    }
}

impl IntegrationSettings {
    const MAX_STEPS: f64 = 1e8;

    fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidIntegration(format!("step must be positive, got {}", self.step)));
        }
        if !(self.max_len.is_finite() && self.max_len >= 0.0) {
            return Err(Error::InvalidIntegration(format!("max_len must be non-negative, got {}", self.max_len)));
        }
        if self.max_len / self.step > Self::MAX_STEPS {
            return Err(Error::InvalidIntegration(format!("max_len / step exceeds {} steps", Self::MAX_STEPS)));
        }
        Ok(())
    }
}

/// Why the tracer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Left the region of interest.
    Boundary,
    /// Reached the interface with the given index.
    Interface(usize),
    MaxLength,
}

/// Region predicate checked after every step. A crossing is located by
/// bisection on the step fraction.
pub trait StopRegion {
    fn check(&self, x: &Vec3) -> Option<Termination>;
}

impl<F: Fn(&Vec3) -> Option<Termination>> StopRegion for F {
    fn check(&self, x: &Vec3) -> Option<Termination> {
        self(x)
    }
}

/// Never stops before `max_len`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unbounded;

impl StopRegion for Unbounded {
    fn check(&self, _: &Vec3) -> Option<Termination> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    /// Arc length from the start.
    pub t: f64,
    pub state: PhotonState,
    /// `p̂ = n(p u + s g × u)` at the sample.
    pub momentum: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub model: Model,
    pub samples: Vec<Sample>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory always holds the start sample")
    }

    pub fn length(&self) -> f64 {
        self.last().t
    }
}

struct Stepper<'a> {
    inv: &'a OrbitInvariants,
    field: &'a IndexField,
    model: Model,
}

impl Stepper<'_> {
    fn rate(&self, x: Vec3, u: Vec3) -> Result<(Vec3, Vec3)> {
        let state = PhotonState::new(x, u)?;
        let d = direction(&state, self.inv, self.field, self.model)?;
        Ok((d.dx, d.du))
    }

    fn step(&self, s: &PhotonState, h: f64) -> Result<PhotonState> {
        let (x, u) = (s.x, s.u);
        let (k1x, k1u) = self.rate(x, u)?;
        let (k2x, k2u) = self.rate(x + k1x * (h / 2.0), u + k1u * (h / 2.0))?;
        let (k3x, k3u) = self.rate(x + k2x * (h / 2.0), u + k2u * (h / 2.0))?;
        let (k4x, k4u) = self.rate(x + k3x * h, u + k3u * h)?;
        let x = x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        let u = u + (k1u + k2u * 2.0 + k3u * 2.0 + k4u) * (h / 6.0);
        PhotonState::new(x, u)
    }

    fn sample(&self, t: f64, state: PhotonState) -> Result<Sample> {
        Ok(Sample { t, state, momentum: momentum_hat(&state, self.inv, self.field)? })
    }
}

/// Trace a ray with RK4 in the gauge `‖δx‖ = 1`.
///
/// The direction `u` is renormalized at every stage. Errors are tagged with
/// the arc length of the step in which they occurred.
pub fn integrate(
    start: &PhotonState,
    inv: &OrbitInvariants,
    field: &IndexField,
    model: Model,
    settings: &IntegrationSettings,
    stop: &dyn StopRegion,
) -> Result<Trajectory> {
    settings.validate()?;
    let stepper = Stepper { inv, field, model };
    let mut state = PhotonState::new(start.x, start.u)?;
    let mut samples = vec![stepper.sample(0.0, state).map_err(|e| e.at_arc(0.0))?];
    let finish = |samples, termination| Ok(Trajectory { model, samples, termination });

    if let Some(term) = stop.check(&state.x) {
        return finish(samples, term);
    }
    let mut t = 0.0;
    let mut k = 0u64;
    loop {
        // Recompute from the step count so long runs land exactly on max_len.
        let next = ((k + 1) as f64 * settings.step).min(settings.max_len);
        let h = next - t;
        if h <= 0.0 {
            return finish(samples, Termination::MaxLength);
        }
        let candidate = stepper.step(&state, h).map_err(|e| e.at_arc(t))?;
        if let Some(mut term) = stop.check(&candidate.x) {
            let (mut lo, mut hi) = (0.0, 1.0);
            let mut at_hi = candidate;
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                let trial = stepper.step(&state, mid * h).map_err(|e| e.at_arc(t))?;
                match stop.check(&trial.x) {
                    Some(found) => {
                        hi = mid;
                        at_hi = trial;
                        term = found;
                    }
                    None => lo = mid,
                }
            }
            let t_stop = t + hi * h;
            samples.push(stepper.sample(t_stop, at_hi).map_err(|e| e.at_arc(t_stop))?);
            return finish(samples, term);
        }
        t = next;
        k += 1;
        state = candidate;
        samples.push(stepper.sample(t, state).map_err(|e| e.at_arc(t))?);
    }
}
