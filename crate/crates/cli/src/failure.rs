use std::fmt;

/// A failed run, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Missing or malformed inputs and flags (exit 1).
    Config(String),
    /// The simulation itself failed (exit 2).
    Simulation(String),
    /// Output could not be written (exit 3).
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Simulation(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Failure::Config(msg.to_string())
    }

    pub fn io(msg: impl fmt::Display) -> Self {
        Failure::Io(msg.to_string())
    }

    /// Errors raised while simulating; file errors still count as I/O.
    pub fn sim(e: tedsim::Error) -> Self {
        match e {
            tedsim::Error::Io(_) | tedsim::Error::Csv(_) => Failure::Io(e.to_string()),
            other => Failure::Simulation(other.to_string()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "invalid configuration: {m}"),
            Failure::Simulation(m) => write!(f, "simulation failed: {m}"),
            Failure::Io(m) => write!(f, "i/o failure: {m}"),
        }
    }
}

impl std::error::Error for Failure {}
