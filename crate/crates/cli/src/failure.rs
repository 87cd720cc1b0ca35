//! Error type carrying the process exit code.

use std::fmt;

pub const CONFIG: u8 = 2;
pub const NUMERICAL: u8 = 3;
pub const OTHER: u8 = 1;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(msg: impl Into<String>) -> Self {
        Self { code: CONFIG, error: anyhow::anyhow!(msg.into()) }
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Self { code: NUMERICAL, error: anyhow::anyhow!(msg.into()) }
    }

    pub fn context(self, msg: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self { code: self.code, error: self.error.context(msg) }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<penumbra::Error> for Failure {
    fn from(e: penumbra::Error) -> Self {
        use penumbra::Error as E;
        let code = match &e {
            E::Domain(_) | E::Dimension { .. } | E::Parse { .. } => CONFIG,
            E::Numerical(_) | E::Singular(_) => NUMERICAL,
            E::Io(_) => OTHER,
        };
        Self { code, error: e.into() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: OTHER, error: e.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self { code: OTHER, error }
    }
}
