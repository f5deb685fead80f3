use std::fmt;
use std::process::ExitCode;

/// A command failure and the exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    Usage(String),
    Data(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Io(_) => 3,
        })
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<refgame_core::Error> for Failure {
    fn from(e: refgame_core::Error) -> Self {
        use refgame_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Io(_) => Failure::Io(msg),
            E::Json(_)
            | E::Parse { .. }
            | E::InvalidScene { .. }
            | E::SceneLookup { .. }
            | E::MissingTarget(_)
            | E::BeliefMismatch(_)
            | E::Contradiction(_)
            | E::GameFinished => Failure::Data(msg),
            E::ObjectCount(_)
            | E::Schema(_)
            | E::Parameter(_)
            | E::Argument(_)
            | E::BeamSize { .. } => Failure::Usage(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}
