use thiserror::Error;

/// Failures reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid band edges: {0}")]
    InvalidEdges(String),
    #[error("a-period matrix is singular or ill-conditioned (condition {0:.3e})")]
    SingularPeriodMatrix(f64),
    #[error("normalisation root lambda_{0} lies outside its gap")]
    RootOutsideGap(usize),
    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),
    #[error("theta function vanishes at a lattice point used for the coefficients")]
    ThetaZero,
    #[error("point is ambiguous on a slit; specify the bank")]
    AmbiguousSlit,
    #[error("inverse quasi-momentum did not converge for w = {0}")]
    NotConverged(String),
    #[error("invalid Dirichlet data: {0}")]
    InvalidDirichletData(String),
    #[error("Dirichlet eigenvalue lies on a band edge at n = {0}")]
    EdgeCase(i64),
    #[error("perturbation support or window is invalid: {0}")]
    InvalidPerturbation(String),
    #[error("perturbed coefficient a(n) is not positive at n = {0}")]
    NonPositiveCoefficient(i64),
    #[error("spectral point lies on the spectrum edge or outside the admissible region")]
    OutOfDomain,
    #[error("bound states too close to resolve (separation {0:.3e})")]
    BoundStatesUnresolved(f64),
    #[error("eigenvector tail truncation too large ({0:.3e})")]
    TailTruncationTooLarge(f64),
    #[error("transmission coefficient vanishes inside the disc")]
    NonSimpleZero,
    #[error("GLM kernel is not positive (smallest eigenvalue {0:.3e})")]
    KernelNotPositive(f64),
    #[error("scattering data fails the admissibility checks: {0}")]
    DataInadmissible(String),
    #[error("Cholesky factorisation failed at n = {0}")]
    CholeskyFailed(i64),
    #[error("reconstructed diagonal K(n, n) is not positive at n = {0}")]
    NonPositiveDiagonal(i64),
    #[error("index {0} is outside the computed window")]
    OutOfWindow(i64),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
