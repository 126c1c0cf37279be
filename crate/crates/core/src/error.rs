use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is singular")]
    Singular,
    #[error("input is not skew-symmetric (residual {0:e})")]
    NotSkew(f64),
    #[error("eigenvalue on the branch cut of the logarithm")]
    BranchCut,
    #[error("zero on the path of a tracked root")]
    DegeneratePairing,
    #[error("branch jump detected at sample {0}; refine the sampling")]
    Resolution(usize),
    #[error("complex structure is not compatible: {0}")]
    Incompatible(String),
    #[error("pair lies on the cut locus (det = {0:e})")]
    CutLocus(f64),
    #[error("pairing degenerates at t = {t} (det = {det:e})")]
    PairingDegenerate { t: f64, det: f64 },
    #[error("grassmann algebra error: {0}")]
    Grassmann(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
