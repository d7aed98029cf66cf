//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NhError {
    #[error("point lies outside the domain of chart `{chart}`")]
    ChartDomain { chart: String },
    #[error("frame is singular at the given point")]
    SingularFrame,
    #[error("kinetic metric restricted to the distribution is not positive definite")]
    SingularMetric,
    #[error("dimension assumption fails: {0}")]
    DimensionAssumption(String),
    #[error("section basis is degenerate (condition number {cond:.3e})")]
    DegenerateSection { cond: f64 },
    #[error("no finite group sample is available for this system")]
    MissingGroupSample,
    #[error("momentum equation is ill posed: {0}")]
    IllPosedMomentumOde(String),
    #[error("ODE step failed: {0}")]
    OdeStepFailure(String),
    #[error("two-form is degenerate on the requested subspace")]
    DegenerateForm,
    #[error("reduced two-form on the leaf is degenerate")]
    DegenerateLeafForm,
    #[error("state is off the momentum level set (residual {residual:.3e})")]
    LevelSetViolation { residual: f64 },
    #[error("inversion did not converge after {iterations} iterations")]
    InversionFailure { iterations: usize },
    #[error("trajectory left the chart domain at t = {time}")]
    DomainExit { time: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

pub type Result<T> = std::result::Result<T, NhError>;
