use std::path::PathBuf;

use chosvd_core::ErrorKind;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot read `{path}`: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write `{path}`: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("`{path}`: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("ingestion failed for {} subject(s):\n{}", .0.len(), itemize(.0))]
    Ingest(Vec<chosvd_core::Error>),

    #[error(transparent)]
    Core(#[from] chosvd_core::Error),
}

fn itemize(errors: &[chosvd_core::Error]) -> String {
    errors
        .iter()
        .map(|e| format!("  - {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Read { .. } | CliError::Write { .. } | CliError::Parse { .. } | CliError::Ingest(_) => {
                EXIT_DATA
            }
            CliError::Core(e) => match e.kind() {
                ErrorKind::Usage => EXIT_USAGE,
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Numerical => EXIT_NUMERICAL,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_per_kind() {
        let numerical = CliError::from(chosvd_core::Error::NoConvergence { sweeps: 100, off: 1.0 });
        let data = CliError::Ingest(vec![chosvd_core::Error::NonFinite]);
        let usage = CliError::from(chosvd_core::Error::InvalidMode(4));
        assert_eq!(
            [usage.exit_code(), data.exit_code(), numerical.exit_code()],
            [EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL]
        );
        assert_eq!(CliError::from(chosvd_core::Error::Singular("x".into())).exit_code(), EXIT_NUMERICAL);
    }
}
