use serde::Serialize;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;
pub const EXIT_IO: i32 = 5;

/// A failure reported as one JSON line on stderr.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    pub error: String,
    #[serde(skip)]
    pub code: i32,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: "usage",
            error: message.into(),
            code: EXIT_USAGE,
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            kind: "io",
            error: message.into(),
            code: EXIT_IO,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

impl From<headpop::Error> for CliError {
    fn from(e: headpop::Error) -> Self {
        use headpop::Error as E;
        let (kind, code) = match &e {
            E::EmptyTitle | E::Config(_) => ("usage", EXIT_USAGE),
            E::Divergence { .. } => ("divergence", EXIT_DIVERGENCE),
            E::Io { .. } => ("io", EXIT_IO),
            _ => ("data", EXIT_DATA),
        };
        CliError {
            kind,
            error: e.to_string(),
            code,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}
