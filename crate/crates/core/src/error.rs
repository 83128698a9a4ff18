use thiserror::Error;

/// Every failure mode of the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("enumeration limit: k = {k} exceeds the maximum of {max} for exhaustive relabeling search")]
    EnumerationLimit { k: usize, max: usize },

    #[error("{what} = {got} exceeds the limit of {max}")]
    TooLarge { what: &'static str, got: usize, max: usize },

    #[error("input contains non-finite entries")]
    NonFinite,

    #[error("non-binary entry {value} at sample {row}, observable {col}")]
    NonBinary { row: usize, col: usize, value: u8 },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error(
        "complex spectrum: imaginary part {max_imag:e} exceeds tolerance {tol:e} \
         (noise too large for a real diagonalization)"
    )]
    ComplexSpectrum { max_imag: f64, tol: f64 },

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("matrix is numerically singular: sigma_min / sigma_max = {ratio:e}")]
    NearSingular { ratio: f64 },

    #[error(
        "rank deficient moment matrix: sigma_k = {sigma_k:e} below threshold {threshold:e} \
         (observable blocks do not carry k independent components)"
    )]
    RankDeficient { sigma_k: f64, threshold: f64 },

    #[error(
        "eigenvalue collision: gap {gap:e} below {threshold:e} \
         (anchor observable not sufficiently separated, cf. the zeta-separation assumption)"
    )]
    EigenvalueCollision { gap: f64, threshold: f64 },

    #[error("normalization unstable: empty-set row of lifted column {column} is {value:e}")]
    NormalizationUnstable { column: usize, value: f64 },

    #[error("degenerate mixing weight: |pi[{index}]| = {value:e} is too small to divide by")]
    DegeneratePi { index: usize, value: f64 },

    #[error("no viable candidate among {tried} partitions")]
    NoViableCandidate { tried: usize },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("certificate failed: {0}")]
    CertificateFailed(String),

    #[error("repeated nodes at positions {0} and {1}")]
    RepeatedNodes(usize, usize),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
