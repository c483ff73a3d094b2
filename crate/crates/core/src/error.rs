use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("malformed parameter document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid parameters: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("inertia matrix is singular (condition number {0:e})")]
    SingularInertia(f64),
    #[error("Euler angle extraction hit gimbal lock (|R31| = {0})")]
    GimbalLock(f64),
    #[error("trim solver did not converge (residual {0:e})")]
    NoConvergence(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SetError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("interval divisor contains zero")]
    DivisionByIntervalContainingZero,
    #[error("reduction budget {r_max} is smaller than the dimension {n}")]
    InvalidBudget { r_max: usize, n: usize },
    #[error("degenerate set: strip update denominator {0:e}")]
    DegenerateSet(f64),
}

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error("innovation covariance is not invertible")]
    SingularInnovation,
    #[error("invalid measurement set: {0}")]
    InvalidMeasurement(String),
}

#[derive(Debug, Error)]
pub enum ControlError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("input map is rank deficient")]
    RankDeficientInput,
    #[error("LMI problem is infeasible: {0}")]
    Infeasible(String),
    #[error("SDP solver stalled: {0}")]
    SolverStall(String),
    #[error("certificate: {0}")]
    Certificate(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("simulation diverged at t = {t:.3} s (|x| = {norm:e})")]
    DivergedSimulation { t: f64, norm: f64 },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
