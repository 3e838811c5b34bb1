//! Trajectories of spinning light rays in an inhomogeneous medium.
//!
//! The state of a propagating ray is a point `(x, u)` of the spherical tangent
//! bundle. Trajectories are the leaves of the 1-dimensional kernel of the
//! presymplectic 2-form
//!
//! ```text
//! σ(δ, δ′) = ⟨δp̂, δ′x⟩ − ⟨δ′p̂, δx⟩ − s⟨u, δu × δ′u⟩,   p̂ = n(p u + s g × u)
//! ```
//!
//! with `g = ∇(1/n)`. Four direction fields are provided, from the plain
//! Fermat equations up to the exact spinoptics foliation written for the
//! general (Riemannian) metric. Every field is returned in the gauge
//! `‖δx‖ = 1`, so the integration parameter is Euclidean arc length. The
//! linearized system is usually quoted with the parameter `τ` for which
//! `δx = p̂ − (s/p) g × p̂`; the two are related by
//! `dt = ‖p̂ − (s/p) g × p̂‖ dτ`.

mod direction;
mod integrate;

pub use direction::{
    direction, direction_full_spin, direction_general_metric, direction_linearized, direction_spinless,
    kernel_residual, momentum_hat, momentum_hat_differential, presymplectic_form,
};
pub use integrate::{integrate, IntegrationSettings, Sample, StopRegion, Termination, Trajectory, Unbounded};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fermat::IndexField;
use crate::linalg::Vec3;
use crate::orbits::unit_direction;

/// Position and unit Euclidean direction of a propagating ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonState {
    pub x: Vec3,
    pub u: Vec3,
}

impl PhotonState {
    /// Normalizes `u`.
    pub fn new(x: Vec3, u: Vec3) -> Result<Self> {
        Ok(Self { x, u: unit_direction(&u)? })
    }
}

/// The same state in metric variables: `X = x`, `U = u / n` with `g(U, U) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricState {
    pub x: Vec3,
    pub unit: Vec3,
}

impl MetricState {
    pub fn new(x: Vec3, unit: Vec3, field: &IndexField) -> Result<Self> {
        let n = field.index(&x)?;
        let norm = n * n * unit.norm_squared();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotMetricUnit(norm));
        }
        Ok(Self { x, unit })
    }

    pub fn from_photon(state: &PhotonState, field: &IndexField) -> Result<Self> {
        let n = field.index(&state.x)?;
        Ok(Self { x: state.x, unit: state.u / n })
    }
}

/// Which foliation generates the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Fermat's equations; independent of color and spin.
    SpinlessFermat,
    /// Exact foliation of Fermat spinoptics.
    FullSpin,
    /// Linearization around `g = 0`, dropping `∇g` and `‖g‖²` terms.
    LinearizedOmn,
    /// The general Riemannian spinoptics system, specialized to the Fermat metric.
    GeneralMetric,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::SpinlessFermat, Model::FullSpin, Model::LinearizedOmn, Model::GeneralMetric];
}

/// A kernel direction `(δu, δx)` normalized to `‖δx‖ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelDirection {
    pub dx: Vec3,
    pub du: Vec3,
    pub model: Model,
}
