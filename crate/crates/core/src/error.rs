use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("site {site} out of range for a lattice of {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("exact path supports at most {max} sites, got {requested}")]
    LatticeTooLarge { requested: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("local operator has odd fermion parity (largest odd entry {0:.3e})")]
    OddParity(f64),

    #[error("support outside the local region: {0}")]
    NotLocal(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("inverse temperature must be positive and finite, got {0}")]
    InvalidBeta(f64),

    #[error(
        "support violation: reference state has a {dim}-dimensional null eigenspace \
         (eigenvalue {eigenvalue:.3e}) carrying weight {weight:.3e} of the true state"
    )]
    SupportViolation { eigenvalue: f64, dim: usize, weight: f64 },

    #[error("non-finite entries encountered: {0}")]
    NonFinite(String),

    #[error("endpoint mismatch: {0}")]
    EndpointMismatch(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("time grid is not strictly increasing at index {0}")]
    NonMonotoneGrid(usize),

    #[error("control dimension mismatch: expected {expected}, got {found}")]
    ControlMismatch { expected: usize, found: usize },

    #[error("drive is not quadratic: {0}")]
    NotQuadratic(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("grid too coarse: Richardson estimate {estimate:.3e} exceeds 10% of value {value:.3e}")]
    GridTooCoarse { estimate: f64, value: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Errors caused by the input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Self::Config(_)
                | Self::LatticeTooLarge { .. }
                | Self::InvalidLattice(_)
                | Self::SiteOutOfRange { .. }
                | Self::InvalidBeta(_)
                | Self::NotQuadratic(_)
                | Self::NotLocal(_)
                | Self::Unsupported(_)
        )
    }
}
