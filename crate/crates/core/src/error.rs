use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Everything that can go wrong inside the numerical pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A case failed structural validation.
    InvalidCase(String),
    /// A referenced bus does not exist. Carries `(from, to)` pairs of every dangling branch.
    DanglingBranches(Vec<(u32, u32)>),
    /// Dynamic generator parameters were missing, duplicated or out of range.
    InvalidDynamics(String),
    /// A generator has no dynamic parameters yet.
    MissingDynamics { generator: usize },
    /// A branch with zero series impedance.
    ZeroImpedance { from: u32, to: u32 },
    /// Newton-Raphson hit its iteration limit.
    PowerFlowDiverged {
        iterations: usize,
        max_mismatch: f64,
    },
    /// The mismatch Jacobian or a reduction block could not be factored.
    Singular(&'static str),
    /// Vector length does not match the generator count.
    LengthMismatch { expected: usize, found: usize },
    /// The eigensolver did not converge.
    EigenFailure,
    /// Zero mode missing or repeated; carries the number found.
    ZeroMode { found: usize },
    /// Golden-section search landed on a bracket end.
    NoInteriorMinimum { lower: f64, upper: f64 },
    /// Every Monte Carlo draw failed.
    AllDrawsFailed { draws: usize },
    /// Not enough samples for the requested statistic.
    InsufficientSamples { required: usize, found: usize },
    /// Quantile grids of the curves being compared differ.
    GridMismatch,
    /// A configuration parameter is out of its domain.
    InvalidParameter(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidCase(msg) => write!(f, "invalid case: {msg}"),
            Error::DanglingBranches(pairs) => {
                write!(f, "branches reference missing buses:")?;
                for (a, b) in pairs {
                    write!(f, " {a}-{b}")?;
                }
                Ok(())
            }
            Error::InvalidDynamics(msg) => write!(f, "invalid dynamics: {msg}"),
            Error::MissingDynamics { generator } => {
                write!(f, "generator {} has no dynamic parameters", generator + 1)
            }
            Error::ZeroImpedance { from, to } => {
                write!(f, "branch {from}-{to} has zero series impedance")
            }
            Error::PowerFlowDiverged {
                iterations,
                max_mismatch,
            } => write!(
                f,
                "power flow did not converge after {iterations} iterations (max mismatch {max_mismatch:e})"
            ),
            Error::Singular(what) => write!(f, "singular matrix in {what}"),
            Error::LengthMismatch { expected, found } => {
                write!(f, "expected {expected} entries, found {found}")
            }
            Error::EigenFailure => write!(f, "eigenvalue iteration failed to converge"),
            Error::ZeroMode { found } => write!(
                f,
                "expected exactly one zero eigenvalue, found {found} (degenerate or disconnected network)"
            ),
            Error::NoInteriorMinimum { lower, upper } => {
                write!(f, "no interior minimum in [{lower}, {upper}]")
            }
            Error::AllDrawsFailed { draws } => write!(f, "all {draws} draws failed"),
            Error::InsufficientSamples { required, found } => {
                write!(f, "need at least {required} samples, got {found}")
            }
            Error::GridMismatch => write!(f, "quantile grids differ"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
