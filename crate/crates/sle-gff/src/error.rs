//! Error types shared by the crate.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("evaluation too close to the kernel singularity at distance {0:.3e}")]
    SingularEvaluation(f64),
    #[error("series tail bound {bound:.3e} above tolerance {tol:.3e} at maximum truncation {n_max}")]
    TruncationFailure { bound: f64, tol: f64, n_max: usize },
    #[error("coincident evaluation points")]
    CoincidentPoints,
    #[error("no backend for this boundary-condition profile")]
    UnsupportedProfile,
    #[error("Richardson extrapolation failed to contract")]
    ExtrapolationDivergence,
    #[error("lattice solver did not converge (residual {0:.3e})")]
    SolverNonConvergence(f64),
    #[error("annulus modulus must be positive")]
    InvalidModulus,
    #[error("point {0} is not on the boundary")]
    NotOnBoundary(Complex64),
    #[error("Riemann-Hilbert theta {0} outside (-1/2, 1/2)")]
    ThetaOutOfRange(f64),
}

#[derive(Debug, Error)]
pub enum LoewnerError {
    #[error("step too large: local error estimate {0:.3e} above tolerance")]
    StepTooLarge(f64),
    #[error("annulus modulus exhausted at t = {0}")]
    ModulusExhausted(f64),
    #[error("backward flow left the domain near t = {0}")]
    InverseDivergence(f64),
    #[error("curve self-intersects at vertex {0}")]
    SelfIntersection(usize),
    #[error("capacity increment {0:.3e} below resolution")]
    CapacityStall(f64),
    #[error("hull too large for requested radius")]
    HullTooLarge,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Error)]
pub enum SleError {
    #[error("driving point collided with force point (distance {0:.3e})")]
    CollisionWithForcePoint(f64),
    #[error("Riemann-Hilbert theta {0} outside (-1/2, 1/2)")]
    ThetaOutOfRange(f64),
    #[error("drift magnitude {0:.3e} exceeds blowup threshold")]
    DriftBlowup(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Loewner(#[from] LoewnerError),
}

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("point swallowed by the hull")]
    SwallowedPoint,
    #[error("branch jump of {0:.3e} between consecutive evaluations; reduce the step")]
    BranchAmbiguity(f64),
    #[error("derivative underflow |g'| = {0:.3e} near swallowing")]
    DerivativeUnderflow(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Loewner(#[from] LoewnerError),
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("finite-difference step invalid near a singularity")]
    FdStepInvalid,
    #[error("more than half of the paths stopped at t = 0")]
    DegenerateStopping,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Loewner(#[from] LoewnerError),
    #[error(transparent)]
    Sle(#[from] SleError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Error)]
pub enum DgffError {
    #[error("Cholesky factorization failed at pivot {0}")]
    FactorizationFailure(usize),
    #[error("boundary data has uniform sign: no interface")]
    NoInterface,
    #[error("curve rasterization conflicts at lattice scale near vertex {0}")]
    RasterizationConflict(usize),
    #[error(transparent)]
    Loewner(#[from] LoewnerError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}
