use std::fmt;

/// Error carrying the process exit code: 2 config, 3 data, 4 numerical.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
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

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<spkm::Error> for CliError {
    fn from(e: spkm::Error) -> Self {
        use spkm::Error as E;
        let msg = e.to_string();
        match e {
            E::Input(_) => CliError::Config(msg),
            E::DegeneratePrediction(_) | E::Numerical(_) => CliError::Numerical(msg),
            E::Dimension { .. } | E::Parse { .. } | E::Data(_) | E::Io(_) | E::Json(_) => CliError::Data(msg),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}
