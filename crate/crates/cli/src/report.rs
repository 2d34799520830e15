// SPDX-License-Identifier: MIT OR Apache-2.0

//! Versioned JSON report written by `fit` and read back by `detect`.

use serde::{Deserialize, Serialize};
use tsbreak_core::serde_matrix::to_rows;
use tsbreak_core::SegmentationResult;

use crate::config::FitConfig;

pub const SCHEMA_VERSION: u32 = 1;

pub const TIME_CONVENTION: &str = "1-based series time (row r of the CSV is time r). \
     norm_times[i] is the time at which difference block i applies; block 0 is the \
     initial level and never a break. A breakpoint b is the first time of a new regime; \
     segment j covers [start, end] inclusive.";

#[derive(Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    pub time_convention: String,
    pub data: DataInfo,
    pub config: FitConfig,
    pub fits: Vec<FitRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DataInfo {
    pub path: String,
    pub n_times: usize,
    pub dim: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitRecord {
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub breakpoints: Vec<usize>,
    pub norm_times: Vec<usize>,
    /// Frobenius norm of each difference block.
    pub norms: Vec<f64>,
    pub segments: Vec<SegmentRecord>,
    pub primal_residuals: Vec<f64>,
    pub dual_residuals: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub start: usize,
    pub end: usize,
    pub rows: usize,
    /// Least-squares refit, `p` rows of `pK` entries, lag-1 block first.
    pub coefficients: Option<Vec<Vec<f64>>>,
    /// Fused-path coefficients averaged over the segment.
    pub fused_coefficients: Option<Vec<Vec<f64>>>,
    pub warning: Option<String>,
}

impl FitRecord {
    pub fn from_result(r: &SegmentationResult) -> Self {
        let segments = r
            .segments
            .iter()
            .zip(&r.fused_coeffs)
            .map(|(s, fused)| SegmentRecord {
                start: s.start,
                end: s.end,
                rows: s.rows,
                coefficients: s.coefficients.as_ref().map(to_rows),
                fused_coefficients: fused.as_ref().map(to_rows),
                warning: s.warning.as_ref().map(|w| w.to_string()),
            })
            .collect();
        Self {
            lambda: r.lambda,
            converged: r.converged,
            iterations: r.iterations,
            objective: r.objective,
            breakpoints: r.breakpoints.clone(),
            norm_times: r.block_times(),
            norms: r.block_norms(),
            segments,
            primal_residuals: r.primal_residuals.clone(),
            dual_residuals: r.dual_residuals.clone(),
        }
    }
}

/// The part of a report `detect` needs.
#[derive(Debug, Deserialize)]
pub struct NormView {
    pub schema_version: u32,
    pub fits: Vec<FitNorms>,
}

#[derive(Debug, Deserialize)]
pub struct FitNorms {
    pub lambda: f64,
    pub norm_times: Vec<usize>,
    pub norms: Vec<f64>,
}

impl FitNorms {
    /// Times whose block norm exceeds `threshold`, skipping block 0.
    pub fn breakpoints(&self, threshold: f64) -> Vec<usize> {
        self.norm_times
            .iter()
            .zip(&self.norms)
            .skip(1)
            .filter(|(_, &n)| n > threshold)
            .map(|(&t, _)| t)
            .collect()
    }
}
