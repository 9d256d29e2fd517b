use std::fmt;

use serde::Serialize;
use wanderkit_core::geom::GeomError;
use wanderkit_core::gs_init::GsError;
use wanderkit_core::img::ImageError;
use wanderkit_core::io::IoError;
use wanderkit_core::nav::NavError;
use wanderkit_core::recon::ReconError;
use wanderkit_core::sim::SimError;
use wanderkit_core::traj_eval::EvalError;

/// Exit-code classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// A metric is undefined for the given inputs.
    Degenerate,
    Usage,
    /// Inputs are missing, malformed or inconsistent.
    Data,
    Internal,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Degenerate => 2,
            Kind::Usage => 64,
            Kind::Data => 65,
            Kind::Internal => 70,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(Kind::Usage, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new(Kind::Data, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(Kind::Internal, message)
    }

    /// Prefixes the message, keeping the class.
    pub fn context(self, what: impl fmt::Display) -> Self {
        Self { kind: self.kind, message: format!("{what}: {}", self.message) }
    }

    /// The single-line JSON object written to stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: Kind,
            exit_code: i32,
            message: &'a str,
        }
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: Body<'a>,
        }
        let body = Body { kind: self.kind, exit_code: self.kind.exit_code(), message: &self.message };
        serde_json::to_string(&Wrapper { error: body }).expect("error object serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<GeomError> for CliError {
    fn from(e: GeomError) -> Self {
        match e {
            GeomError::Degenerate(_) => Self::new(Kind::Degenerate, e.to_string()),
            GeomError::InvalidParameter(_) => Self::usage(e.to_string()),
            _ => Self::data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Geom(g) => g.into(),
            EvalError::Undefined(_) => Self::new(Kind::Degenerate, e.to_string()),
            EvalError::Empty => Self::data(e.to_string()),
        }
    }
}

impl From<ReconError> for CliError {
    fn from(e: ReconError) -> Self {
        match e {
            ReconError::InvalidParameter(_) => Self::usage(e.to_string()),
            _ => Self::data(e.to_string()),
        }
    }
}

impl From<NavError> for CliError {
    fn from(e: NavError) -> Self {
        match e {
            NavError::InvalidParameter(_) => Self::usage(e.to_string()),
            _ => Self::data(e.to_string()),
        }
    }
}

impl From<GsError> for CliError {
    fn from(e: GsError) -> Self {
        match e {
            GsError::InvalidParameter(_) => Self::usage(e.to_string()),
            _ => Self::data(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidParameter(_) => Self::usage(e.to_string()),
            SimError::Nav(n) => n.into(),
            SimError::NoEpisodes => Self::new(Kind::Degenerate, e.to_string()),
            SimError::Log { .. } => Self::data(e.to_string()),
            SimError::Io(_) => Self::internal(e.to_string()),
        }
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::internal(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::data(e.to_string())
    }
}
