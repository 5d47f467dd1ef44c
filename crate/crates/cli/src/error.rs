use serde_json::{json, Value};

/// Failure of a command, with the process exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration ({} problems)", .0.len())]
    Config(Vec<String>),
    #[error("assumption failed: {0}")]
    Assumption(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Assumption(_) => 4,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            CliError::Config(v) => json!({"error": "config", "exit_code": 2, "violations": v}),
            CliError::Assumption(m) => json!({"error": "assumption", "exit_code": 4, "message": m}),
            CliError::Numerical(m) => json!({"error": "numerical", "exit_code": 3, "message": m}),
            CliError::Io(m) => json!({"error": "io", "exit_code": 3, "message": m}),
        }
    }
}

impl From<magwell::Error> for CliError {
    fn from(e: magwell::Error) -> Self {
        use magwell::Error as E;
        match e {
            E::Assumption(_) | E::Boundary(_) | E::DegenerateField(_) | E::Degeneracy(_) | E::Resonance { .. } => {
                CliError::Assumption(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<magwell_oracle::OracleError> for CliError {
    fn from(e: magwell_oracle::OracleError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
