use droptest::Error as DomainError;
use thiserror::Error;

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("{0}")]
    Conflict(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    Invalid(String),
    #[error("storage failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("stored data is corrupt: {0}")]
    Corrupt(String),
}

/// How a failure should be presented to a caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Conflict,
    NotFound,
    Invalid,
    Internal,
}

impl ServiceError {
    pub fn kind(&self) -> Kind {
        match self {
            ServiceError::Conflict(_) => Kind::Conflict,
            ServiceError::NotFound(_) => Kind::NotFound,
            ServiceError::Invalid(_) => Kind::Invalid,
            ServiceError::Io(_) | ServiceError::Corrupt(_) => Kind::Internal,
            ServiceError::Domain(e) => match e {
                DomainError::ProtocolViolation(_)
                | DomainError::NotReady
                | DomainError::SearchExhausted(_) => Kind::Conflict,
                DomainError::NotFound(_) => Kind::NotFound,
                DomainError::StateCorruption(_) | DomainError::Io(_) => Kind::Internal,
                _ => Kind::Invalid,
            },
        }
    }

    /// Short machine-readable slug used as the problem type.
    pub fn slug(&self) -> &'static str {
        match self {
            ServiceError::Conflict(_) => "conflict",
            ServiceError::NotFound(_) => "not-found",
            ServiceError::Invalid(_) => "validation",
            ServiceError::Io(_) => "storage",
            ServiceError::Corrupt(_) => "corrupt-store",
            ServiceError::Domain(e) => match e {
                DomainError::ProtocolViolation(_) => "protocol-violation",
                DomainError::NotReady => "not-ready",
                DomainError::SearchExhausted(_) => "search-exhausted",
                DomainError::MissingMeasurement(_) => "missing-measurement",
                DomainError::InfeasibleTarget { .. } => "infeasible-target",
                DomainError::NotFound(_) => "not-found",
                DomainError::StateCorruption(_) => "state-corruption",
                DomainError::Parse { .. } | DomainError::Sequencing { .. } => "trace-parse",
                DomainError::Io(_) => "storage",
                _ => "validation",
            },
        }
    }
}
