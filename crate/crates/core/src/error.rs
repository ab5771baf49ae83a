use alloc::string::String;

/// Errors raised by the numerical core.
///
/// Diagnostics that only flag a condition (hypothesis checks, relation suites,
/// Caccioppoli comparisons) return reports instead of errors.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("exponent range error at node {node}: {detail}")]
    ExponentRange { node: usize, detail: String },
    #[error("supercriticality gap error at node {node}: q - p* = {gap} is not positive")]
    SupercriticalityGap { node: usize, gap: f64 },
    #[error("malformed exponent data: {0}")]
    MalformedExponent(String),
    #[error("field mismatch: expected {expected} nodes, got {got}")]
    FieldMismatch { expected: usize, got: usize },
    #[error("grid too coarse: axis {axis} has {nodes} nodes")]
    GridTooCoarse { axis: usize, nodes: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("norm bisection failure: bracket [{lo}, {hi}] after {iterations} iterations")]
    NormBisection { lo: f64, hi: f64, iterations: usize },
    #[error("ball containment error: ball of radius {radius} is not strictly inside the domain")]
    BallContainment { radius: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("growth bound violated at s = {s}: |g| = {value} > {bound}")]
    GrowthBoundViolated { s: f64, value: f64, bound: f64 },
    #[error("growth hypothesis violated: |f(x,s)|/|s|^(p(x)-1) does not decay ({detail})")]
    GrowthRatioUnbounded { detail: String },
    #[error("positive-primitive hypothesis not witnessed: best J/Phi over the candidate family is {theta}")]
    ThetaNotWitnessed { theta: f64 },
    #[error("descent stagnation after {iterations} iterations: residual sup norm {residual}")]
    DescentStagnation { iterations: usize, residual: f64 },
    #[error("landscape inconsistency: every start converged to zero although lambda > 1/theta")]
    LandscapeInconsistency,
    #[error("local-min verification failed: energy {energy} on ring of radius {radius}")]
    LocalMinVerification { radius: f64, energy: f64 },
    #[error("saddle search collapsed to an endpoint")]
    CollapseToEndpoint,
    #[error("saddle search failed: {0}")]
    SaddleSearchFailed(String),
    #[error("radius out of range: R = {0} must lie in (0, 1]")]
    RadiusOutOfRange(f64),
    #[error("certifier inconsistency: bound certified but max |u| = {direct_sup} exceeds K = {k}")]
    CertifierInconsistency { direct_sup: f64, k: f64 },
    #[error("no admissible K at this resolution: largest bracket value {best_bracket}")]
    NoAdmissibleK { best_bracket: f64 },
    #[error("expression error: {0}")]
    Expression(String),
}

pub type Result<T> = core::result::Result<T, Error>;
