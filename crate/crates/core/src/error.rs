use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("letter {letter} does not index a branch of this system")]
    NoSuchLetter { letter: u64 },

    #[error("preimage solve did not converge at depth {depth}: {detail}")]
    RootFinder { depth: u64, detail: String },

    #[error("pressure is infinite at q={q}, b={b}")]
    InfinitePressure { q: f64, b: f64 },

    #[error("potential is not locally constant on 1-cylinders for `{0}`; use the cylinder sandwich")]
    NotLocallyConstant(String),

    #[error("tolerance {tolerance:e} unreachable at truncation {truncation}: achieved [{lower}, {upper}]")]
    ToleranceUnreachable {
        tolerance: f64,
        truncation: u64,
        lower: f64,
        upper: f64,
    },

    #[error("{words:e} words exceed the cap {cap:e}; lower the depth or the truncation")]
    WordCountOverflow { words: f64, cap: f64 },

    #[error("no sign change of the pressure on the window [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("H1 violated: omega-shell {shell} is empty")]
    EmptyShell { shell: u64 },

    #[error("H3 sandwich fails at shell {shell}: ratio {ratio:e} outside [{lower:e}, {upper:e}]")]
    SandwichViolation {
        shell: u64,
        ratio: f64,
        lower: f64,
        upper: f64,
    },

    #[error("non-finite measure value at t={t}")]
    NonFiniteMeasure { t: f64 },

    #[error("degenerate regression: {0}")]
    Regression(String),

    #[error("tau is essentially constant under the current Gibbs measure (Var = {variance:e})")]
    Degenerate { variance: f64 },

    #[error("alpha={alpha} is not above alpha_min={alpha_min}")]
    AlphaBelowMinimum { alpha: f64, alpha_min: f64 },

    #[error(
        "Newton stalled at alpha={alpha} after {iters} iterations: q={q:e}, b={b}, |p|={residual_p:e}, |dp/dq|={residual_dp:e}"
    )]
    NewtonFailed {
        alpha: f64,
        iters: usize,
        q: f64,
        b: f64,
        residual_p: f64,
        residual_dp: f64,
    },

    #[error("no starting point found at alpha={alpha}: {detail}")]
    NoInitialGuess { alpha: f64, detail: String },

    #[error("need at least {needed} points, have {have}")]
    InsufficientPoints { needed: usize, have: usize },

    #[error("gap b*-b(alpha)={gap:e} at alpha={alpha} is within 100x of the residual {residual:e}")]
    GapBelowNoise { alpha: f64, gap: f64, residual: f64 },

    #[error("fitted q-law exponent {exponent} does not give a convergent tail integral")]
    DivergentQTail { exponent: f64 },

    #[error("invalid configuration field `{field}`: {detail}")]
    Config { field: String, detail: String },

    #[error("nothing to plot: {0}")]
    EmptyPlot(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {detail}")]
    Output { path: PathBuf, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::ParameterOutOfRange(msg.into())
    }

    pub(crate) fn config(field: &str, detail: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            detail: detail.into(),
        }
    }
}
