use std::path::PathBuf;

use thiserror::Error;

use crate::sim::SimTime;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("cannot schedule at {at}: clock is already at {now}")]
    ScheduleInPast { at: SimTime, now: SimTime },
}

/// A problem in a line-oriented text input (scenario or topology file).
#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    ParseInline(#[from] ParseError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("wall-time budget of {budget:?} exceeded at sim time {at}")]
    WallBudget { budget: std::time::Duration, at: SimTime },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Report(String),
    #[error("run {protocol}/{nodes}/seed {seed} failed: {reason}")]
    RunFailed {
        protocol: String,
        nodes: usize,
        seed: u64,
        reason: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
