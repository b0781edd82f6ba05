use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("coefficients must satisfy c1^2 + c2^2 = 1 (got {norm})")]
    Normalization { norm: f64 },
    #[error("frequencies must be positive")]
    Frequency,
    #[error("omega_x and omega_y must differ")]
    DegenerateFrequencies,
    #[error("displacement a0 must be positive (got {a0})")]
    Displacement { a0: f64 },
    #[error("parameters must be finite")]
    NonFinite,
}

/// `|Psi|^2` fell below the singularity floor; the velocity is meaningless there.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("near-node singularity at ({x}, {y}, t={t}): relative density {relative_density:e}")]
pub struct NearNodeSingularity {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub relative_density: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NodeError {
    #[error("nodes are at infinity at t={t}")]
    NodesAtInfinity { t: f64 },
    #[error("product state (a vanishing coefficient) has no nodes")]
    NoNodes,
    #[error("x-point search did not converge: {reason}")]
    NotFound { reason: String },
    #[error("stationary point at ({x}, {y}) is not hyperbolic (eigenvalues {eigenvalues:?})")]
    NotHyperbolic {
        x: f64,
        y: f64,
        eigenvalues: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("invalid integrator configuration: {0}")]
    Config(String),
    #[error("start point is singular: {0}")]
    SingularStart(NearNodeSingularity),
    #[error("step size underflow at t={t} (h={h:e})")]
    StepUnderflow { t: f64, h: f64 },
}

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("sample interval mismatch: grid {grid}, record {record}")]
    SampleDtMismatch { grid: f64, record: f64 },
    #[error("grid geometries differ")]
    GeometryMismatch,
    #[error("malformed dump: {0}")]
    Decode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChaosError {
    #[error("trajectory horizon {horizon} is shorter than the required {required}")]
    HorizonTooShort { horizon: f64, required: f64 },
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("invalid ensemble specification: {0}")]
    Spec(String),
    #[error("malformed particle file: {0}")]
    Decode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
