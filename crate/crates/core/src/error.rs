use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Bad argument: dimension mismatch, a quadruple outside `P`, a floor
    /// above a sequence term, an empty index window.
    InvalidInput(String),
    /// A sampler produced nothing usable.
    EstimationFailure(String),
    /// A quantity needed for certification (an infimum, a set distance) has
    /// not been supplied or estimated.
    NotCertified(String),
    /// A map sent a point outside its target region.
    DomainViolation { step: usize, side: &'static str, detail: String },
    /// NaN or infinity in an evaluation.
    Numeric(String),
    /// A sequence's `f`-tail does not approach the infimum.
    NotAnInfimumSequence(String),
    /// Finite data could not decide the question (no Cauchy window).
    Undecided(String),
    /// A construction-time contraction probe failed.
    Refuted(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Error::EstimationFailure(m) => write!(f, "estimation failure: {m}"),
            Error::NotCertified(m) => write!(f, "not certified: {m}"),
            Error::DomainViolation { step, side, detail } => {
                write!(f, "domain violation on the {side} side at step {step}: {detail}")
            }
            Error::Numeric(m) => write!(f, "numeric failure: {m}"),
            Error::NotAnInfimumSequence(m) => write!(f, "not an infimum sequence: {m}"),
            Error::Undecided(m) => write!(f, "undecided: {m}"),
            Error::Refuted(m) => write!(f, "refuted: {m}"),
        }
    }
}

impl core::error::Error for Error {}
