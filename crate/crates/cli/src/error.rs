use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numeric(String),
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
            CliError::NotConverged(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numeric",
            CliError::NotConverged(_) => "not-converged",
            CliError::Io(_) => "io",
        }
    }
}

impl From<lvchemo::sim::SimError> for CliError {
    fn from(e: lvchemo::sim::SimError) -> Self {
        use lvchemo::sim::SimError;
        match e {
            SimError::ProbeNotConverged { .. } => CliError::NotConverged(e.to_string()),
            SimError::TooFewCells { .. }
            | SimError::InvalidGrid { .. }
            | SimError::InvalidPerturbation(_)
            | SimError::Bracket(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<lvchemo::galerkin::GalerkinError> for CliError {
    fn from(e: lvchemo::galerkin::GalerkinError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<lvchemo::stability::StabilityError> for CliError {
    fn from(e: lvchemo::stability::StabilityError) -> Self {
        use lvchemo::stability::StabilityError;
        match e {
            StabilityError::NoInstability => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<lvchemo::spectral::SpectralError> for CliError {
    fn from(e: lvchemo::spectral::SpectralError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("csv: {e}"))
    }
}
