use thiserror::Error;

/// Command failure classified by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, malformed or invalid configuration (exit 2).
    #[error("config error: {0}")]
    Config(String),
    /// Missing or malformed input data (exit 3).
    #[error("data error: {0}")]
    Data(String),
    /// A fit, calibration or search failed (exit 4).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<cqed_core::model::ModelError> for CliError {
    fn from(e: cqed_core::model::ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<cqed_core::scattering::ScatteringError> for CliError {
    fn from(e: cqed_core::scattering::ScatteringError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<cqed_core::spectra::SpectraError> for CliError {
    fn from(e: cqed_core::spectra::SpectraError) -> Self {
        use cqed_core::spectra::SpectraError as E;
        match e {
            E::InvalidModel(_) | E::Scattering(_) => CliError::Config(e.to_string()),
            E::NegativeIntensity(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<cqed_core::fitting::FitError> for CliError {
    fn from(e: cqed_core::fitting::FitError) -> Self {
        use cqed_core::fitting::FitError as E;
        match e {
            E::InvalidInput(_) | E::Underdetermined { .. } => CliError::Data(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<cqed_core::readout::ReadoutError> for CliError {
    fn from(e: cqed_core::readout::ReadoutError) -> Self {
        use cqed_core::readout::ReadoutError as E;
        match e {
            E::InvalidConfig(_) => CliError::Config(e.to_string()),
            E::InsufficientData(_) | E::Csv(_) => CliError::Data(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<cqed_core::loss_budget::BudgetError> for CliError {
    fn from(e: cqed_core::loss_budget::BudgetError) -> Self {
        use cqed_core::loss_budget::BudgetError as E;
        match e {
            E::InvalidInput(_) => CliError::Config(e.to_string()),
            E::Infeasible(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<cqed_design::DesignError> for CliError {
    fn from(e: cqed_design::DesignError) -> Self {
        use cqed_design::DesignError as E;
        match e {
            E::InvalidInput(_) => CliError::Config(e.to_string()),
            E::External(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<cqed_magnet::MagnetError> for CliError {
    fn from(e: cqed_magnet::MagnetError) -> Self {
        use cqed_magnet::MagnetError as E;
        match e {
            E::InvalidInput(_) => CliError::Config(e.to_string()),
            E::Io(_) | E::Csv(_) => CliError::Data(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
