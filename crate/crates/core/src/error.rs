use thiserror::Error;

/// Errors raised by the orbit, geometry, propagation and scattering routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate direction vector (norm {norm:e})")]
    DegenerateDirection { norm: f64 },

    #[error("invalid orbit invariants: {0}")]
    InvalidInvariants(String),

    #[error("tangent vector violates orbit constraints: {0}")]
    InvalidTangent(String),

    #[error("frame (v1, v2, u) is not orthonormal and positively oriented")]
    NonOrthonormalFrame,

    #[error("the spinless potential requires s = 0 (got s = {0})")]
    SpinfulPotential(f64),

    #[error("point ({x}, {y}, {z}) lies outside the field domain", x = .0[0], y = .0[1], z = .0[2])]
    OutOfDomain([f64; 3]),

    #[error("refractive index {index:e} is too close to zero at ({x}, {y}, {z})", x = .at[0], y = .at[1], z = .at[2])]
    VanishingIndex { index: f64, at: [f64; 3] },

    #[error("invalid index field: {0}")]
    InvalidField(String),

    #[error("malformed grid file: {0}")]
    GridFormat(String),

    #[error("metric direction is not g-unit (g(U,U) = {0})")]
    NotMetricUnit(f64),

    #[error("degenerate spin kernel at arc parameter {arc}")]
    DegenerateKernel { arc: f64 },

    #[error("p^2 + s^2 Ein(U,U) vanishes at arc parameter {arc}")]
    SpinCurvatureSingularity { arc: f64 },

    #[error("field evaluation failed at arc parameter {arc}: {source}")]
    Propagation { arc: f64, source: Box<Error> },

    #[error("invalid integration settings: {0}")]
    InvalidIntegration(String),

    #[error("invalid interface: {0}")]
    InvalidInterface(String),

    #[error("refraction impossible (discriminant {discriminant:e}); total reflection required")]
    TotalReflectionRequired { discriminant: f64 },

    #[error("ray is not incoming on the interface (normal component {normal_component:e})")]
    NotIncoming { normal_component: f64 },

    #[error("translation must be parallel to the interface (⟨n,c⟩ = {0:e})")]
    TranslationOffPlane(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach an arc parameter to errors raised while integrating.
    pub(crate) fn at_arc(self, arc: f64) -> Self {
        match self {
            Error::DegenerateKernel { .. } => Error::DegenerateKernel { arc },
            Error::SpinCurvatureSingularity { .. } => Error::SpinCurvatureSingularity { arc },
            e @ Error::Propagation { .. } => e,
            other => Error::Propagation { arc, source: Box::new(other) },
        }
    }
}
