use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("insufficient precision: {0}")]
    InsufficientPrecision(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("indeterminate valuation: {0}")]
    IndeterminateValuation(String),
    #[error("reducible polynomial: factor {0}")]
    ReduciblePolynomial(String),
    #[error("not a uniformizer system at level {level}: {reason}")]
    NotUniformizers { level: usize, reason: String },
    #[error("characteristic obstruction: {0}")]
    CharacteristicObstruction(String),
    #[error("basis is not filtered: {0}")]
    BasisNotFiltered(String),
    #[error("wild ramification: ramification index {e} divisible by characteristic {p}")]
    WildRamification { e: u32, p: u32 },
    #[error("unsupported extension: {0}")]
    UnsupportedExtension(String),
    #[error("singular matrix")]
    SingularMatrix,
    #[error("lattice is not contained in the ambient lattice")]
    NotContained,
    #[error("operator carries no band certificate: {0}")]
    NoCertificate(String),
    #[error("not certifiable: {0}")]
    NotCertifiable(String),
    #[error("quotient not reduced to a finite space: {0}")]
    NotReduced(String),
    #[error("unmapped symbol: {0}")]
    UnmappedSymbol(String),
    #[error("factorization out of scope: {0}")]
    FactorizationOutOfScope(String),
    #[error("parse error at {position}: expected {expected}")]
    Parse { position: usize, expected: String },
    #[error("invalid input: {0}")]
    Domain(String),
}

impl Error {
    /// Stable machine-readable code used in CLI output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InsufficientPrecision(_) => "InsufficientPrecision",
            Error::DivisionByZero => "DivisionByZero",
            Error::IndeterminateValuation(_) => "IndeterminateValuation",
            Error::ReduciblePolynomial(_) => "ReduciblePolynomial",
            Error::NotUniformizers { .. } => "NotUniformizers",
            Error::CharacteristicObstruction(_) => "CharacteristicObstruction",
            Error::BasisNotFiltered(_) => "BasisNotFiltered",
            Error::WildRamification { .. } => "WildRamification",
            Error::UnsupportedExtension(_) => "UnsupportedExtension",
            Error::SingularMatrix => "SingularMatrix",
            Error::NotContained => "NotContained",
            Error::NoCertificate(_) => "NoCertificate",
            Error::NotCertifiable(_) => "NotCertifiable",
            Error::NotReduced(_) => "NotReduced",
            Error::UnmappedSymbol(_) => "UnmappedSymbol",
            Error::FactorizationOutOfScope(_) => "FactorizationOutOfScope",
            Error::Parse { .. } => "ParseError",
            Error::Domain(_) => "Domain",
        }
    }

    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } => 2,
            Error::InsufficientPrecision(_) | Error::IndeterminateValuation(_) => 3,
            _ => 4,
        }
    }
}

pub(crate) fn precision(msg: impl Into<String>) -> Error {
    Error::InsufficientPrecision(msg.into())
}
