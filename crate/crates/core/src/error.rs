use thiserror::Error;

/// Errors produced by the simulator and the identification pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MfiError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("roll-off factor {0} outside [0, 1]")]
    InvalidRolloff(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "frame of {frame_len} samples is shorter than the dispersive spread of {spread} samples"
    )]
    FrameTooShort { frame_len: usize, spread: usize },

    #[error("frame of {samples} samples is too short for the matched filter (needs > {required})")]
    FilterSpan { samples: usize, required: usize },

    #[error("k = {k} out of range for {points} points")]
    InvalidK { k: usize, points: usize },

    #[error("separation is undefined for a partition with {0} cluster(s)")]
    UndefinedSeparation(usize),

    #[error("cluster {0} of the partition is empty")]
    EmptyCluster(usize),

    #[error("histogram has no nonzero bins")]
    EmptyHistogram,

    #[error("decision table: {0}")]
    DecisionTable(String),
}

pub type Result<T, E = MfiError> = std::result::Result<T, E>;
