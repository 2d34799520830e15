// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors produced by the segmentation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("series of length N={n_times} is too short for lag order K={lag}; need N >= K + 2")]
    SeriesTooShort { n_times: usize, lag: usize },

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),

    /// The smoother schedule is shared by every coefficient row, so the
    /// failure is reported by time step only.
    #[error("predicted covariance at step {time} is numerically singular")]
    SingularCovariance { time: usize },

    #[error("instance too large for dense solve: {size} > {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("invalid breakpoints: {0}")]
    InvalidBreakpoints(String),

    #[error(
        "segment {segment} has {rows} usable rows; least-squares refit needs at least {required}"
    )]
    SegmentTooShort {
        segment: usize,
        rows: usize,
        required: usize,
    },

    #[error(
        "segment {segment} regressors have rank {rank} < {required}; refit is not identifiable"
    )]
    RankDeficient {
        segment: usize,
        rank: usize,
        required: usize,
    },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
