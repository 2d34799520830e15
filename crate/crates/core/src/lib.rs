// SPDX-License-Identifier: MIT OR Apache-2.0

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

//! Structural-break detection for vector autoregressions with a group fused
//! lasso on coefficient differences, solved by ADMM with a Kalman smoother.

pub mod admm;
pub mod config;
pub mod error;
pub mod kalman;
pub mod oracle;
pub mod path;
pub mod segment;
pub mod serde_matrix;
pub mod series;
pub mod simulate;

pub use config::SolverConfig;
pub use error::{Error, Result};
pub use path::{objective, CoefficientPath, DiffPath};
pub use segment::{segment, SegmentFit, SegmentationResult};
pub use series::{LaggedDesign, TimeSeries};
