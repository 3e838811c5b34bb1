//! Geometrical spinoptics: colored, circularly polarized light rays.
//!
//! * [`orbits`]: the SE(3) coadjoint orbit of rays `(q, u)`, its momentum map
//!   and twisted symplectic form.
//! * [`fermat`]: index fields and the curvature of the Fermat metric.
//! * [`propagation`]: the kernel direction fields of the spinoptics 2-forms
//!   and an RK4 tracer.
//! * [`scattering`]: the equivariant scattering symplectomorphism at a planar
//!   interface.

pub mod error;
pub mod fermat;
pub mod linalg;
pub mod orbits;
pub mod propagation;
pub mod scattering;

pub use error::{Error, Result};
pub use fermat::{CurvatureData, GridField, IndexField, IndexJet, VelocityData};
pub use linalg::{Mat3, Vec3};
pub use orbits::{MomentumValue, OrbitInvariants, OrbitTangent, Ray};
pub use propagation::{KernelDirection, MetricState, Model, PhotonState};
pub use scattering::{ConservationReport, Interface, ScatterCoefficients, ScatterMode, ScatterOutcome};
