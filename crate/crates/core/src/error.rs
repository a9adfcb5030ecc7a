use thiserror::Error;

use crate::exactalg::AlgError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error(transparent)]
    Alg(#[from] AlgError),
    #[error("a log curve needs at least 3 marked points, got {0}")]
    TooFewPoints(usize),
    #[error("marked point {0} repeated")]
    DuplicatePoint(String),
    #[error("marked point {0} is not rational over the prime field")]
    NotPrimeRational(String),
    #[error("{0} is not a marked point")]
    PointNotMarked(String),
    #[error("covers are unrelated")]
    UnrelatedCovers,
    #[error("invalid cochain: {0}")]
    InvalidCochain(String),
    #[error("balanced splitting type ({0}, {0}): no canonical maximal sub line bundle")]
    BalancedSplitting(i64),
    #[error("filtration is preserved by the connection: graded Higgs field vanishes")]
    FiltrationFlat,
    #[error("connection is not logarithmic at {0}")]
    NotLogarithmic(String),
    #[error("Higgs field is not of graded shape")]
    NotGraded,
    #[error("Higgs field is not nilpotent: {0}")]
    NotNilpotent(String),
    #[error("residue of the descended connection is nonzero at {0}")]
    NonNilpotentResidue(String),
    #[error("chart data disagree on an overlap: {0}")]
    ChartIncompatible(String),
    #[error("Frobenius descent failed: {0}")]
    DescentFailed(String),
    #[error("lifting atlases live over different curves")]
    AtlasMismatch,
    #[error("the section is zero")]
    ZeroSection,
    #[error("graph counts do not match: {0}")]
    CountMismatch(String),
    #[error("labeling is not excellent: {0}")]
    LabelingNotExcellent(String),
    #[error("malformed input: {0}")]
    Input(String),
    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
