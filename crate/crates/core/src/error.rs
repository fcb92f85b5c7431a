use thiserror::Error;

/// Everything that can go wrong between a config file and a CSV on disk.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{quantity} = {value:e} is outside [{min:e}, {max:e}]")]
    Domain {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("total internal reflection: n*sin(apex/2) = {0} exceeds 1")]
    TotalInternalReflection(f64),

    #[error("grazing incidence: sin(apex/2)^-2 - n^2 = {0:e} is not positive")]
    GrazingIncidence(f64),

    #[error("negative Sellmeier radicand {0:e}; coefficients are inconsistent")]
    NegativeRadicand(f64),

    #[error("unreachable target slope {target:e}; achievable range is ({min:e}, {max:e})")]
    UnreachableSlope { target: f64, min: f64, max: f64 },

    #[error("weak value condition k*sigma << 1 violated: k*sigma = {k_sigma:e} > {bound}")]
    WeakValueViolation { k_sigma: f64, bound: f64 },

    #[error("dark port carries no light (normalization {0:e} below floor)")]
    DarkPortEmpty(f64),

    #[error("sample rate {sample_rate} Hz is below 20 x center ({center} Hz)")]
    Aliasing { sample_rate: f64, center: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("{0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Wraps `self` with a note on where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error under any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Context { source, .. } => source.exit_code(),
            Error::Validation(_) | Error::Parse { .. } | Error::Io(_) | Error::Domain { .. } => 2,
            Error::TotalInternalReflection(_)
            | Error::GrazingIncidence(_)
            | Error::UnreachableSlope { .. }
            | Error::WeakValueViolation { .. }
            | Error::DarkPortEmpty(_)
            | Error::Aliasing { .. } => 3,
            Error::NegativeRadicand(_) | Error::DegenerateFit(_) | Error::Numerical(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
