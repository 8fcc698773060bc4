use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Numerical(sfwm_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    /// Sort a core error raised while running a command. Errors caused by
    /// an out-of-range input are reported against the config key that
    /// most likely produced them.
    pub fn from_core(e: sfwm_core::Error, text: &str) -> Self {
        use sfwm_core::Error as E;
        let path = match &e {
            E::Aliasing { .. } => Some("hom.max_delay_ps"),
            E::GainGuard { .. } => Some("pump.p_avg_uw"),
            E::FilterOutsideGrid { .. } => Some("filters"),
            E::OutOfWindow { .. } => Some("grid.n_sigma"),
            E::NoFactorableWidth { .. } => Some("fiber.dispersion"),
            E::Domain { .. } | E::AxisMismatch(_) => None,
            _ => return CliError::Numerical(e),
        };
        CliError::Config(ConfigError {
            path: path.map(str::to_string),
            line: path.and_then(|p| crate::config::locate(text, p)),
            message: e.to_string(),
        })
    }
}
