use thiserror::Error;

/// Errors raised by model construction, evaluation, fitting and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(
        "integration did not converge after {subdivisions} subdivisions \
         (estimate {estimate:e}, error {error:e}, worst interval [{lo:e}, {hi:e}])"
    )]
    Integration {
        subdivisions: usize,
        estimate: f64,
        error: f64,
        lo: f64,
        hi: f64,
    },
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("unsupported conversion: {0}")]
    UnsupportedConversion(String),
    #[error("unsupported event: {0}")]
    UnsupportedEvent(String),
    #[error("shape parameters differ: {0}")]
    MixedShape(String),
    #[error("envelope violated at {witness:?} (acceptance ratio {ratio})")]
    EnvelopeViolation { witness: Vec<f64>, ratio: f64 },
    #[error("proposal budget of {budget} exceeded")]
    BudgetExceeded { budget: u64 },
    #[error("row {row}: {source}")]
    Row { row: usize, source: Box<Error> },
}

impl Error {
    /// Short machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "DomainError",
            Error::Overflow(_) => "OverflowError",
            Error::Model(_) => "ModelError",
            Error::Config(_) => "ConfigError",
            Error::Data(_) => "DataError",
            Error::Integration { .. } => "IntegrationError",
            Error::UnsupportedModel(_) => "UnsupportedModelError",
            Error::UnsupportedConversion(_) => "UnsupportedConversionError",
            Error::UnsupportedEvent(_) => "UnsupportedEventError",
            Error::MixedShape(_) => "MixedShapeError",
            Error::EnvelopeViolation { .. } => "EnvelopeViolation",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::Row { source, .. } => source.kind(),
        }
    }

    /// True for failures of a numerical procedure rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Integration { .. }
            | Error::Overflow(_)
            | Error::EnvelopeViolation { .. }
            | Error::BudgetExceeded { .. } => true,
            Error::Row { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn at_row(self, row: usize) -> Error {
        Error::Row {
            row,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
