// SPDX-License-Identifier: MIT OR Apache-2.0

//! Break detection on a solved difference path and per-segment refits.
//!
//! Times are 1-based positions in the original series. Difference block `i`
//! (0-based) describes the change at series time `i + 1 + K`, so a reported
//! break `b` is the first observation governed by the new coefficients.
//! Segment `j` covers `[start_j, end_j]` with `start_0 = 1`,
//! `start_j = b_j` and `end_j = start_{j+1} - 1`.

use nalgebra::DMatrix;

use crate::admm::{self, AdmmSolution, IterationInfo};
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::path::DiffPath;
use crate::series::TimeSeries;

/// Singular values below this fraction of the largest count as zero in a refit.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Break times from per-block norms: every block `i >= 1` whose norm exceeds
/// `threshold`, mapped to series time `i + 1 + lag`.
pub fn detect_from_norms(norms: &[f64], lag: usize, threshold: f64) -> Vec<usize> {
    norms
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &n)| n > threshold)
        .map(|(i, _)| i + 1 + lag)
        .collect()
}

/// Break times of `w`: blocks `t >= 2` with Frobenius norm above `threshold`.
pub fn detect_changepoints(w: &DiffPath, threshold: f64) -> Vec<usize> {
    detect_from_norms(&w.block_norms(), w.lag(), threshold)
}

/// Least-squares refit of one segment.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentFit {
    /// First series time of the segment (1-based, inclusive).
    pub start: usize,
    /// Last series time of the segment (inclusive).
    pub end: usize,
    /// Regression rows whose target and lags all lie in `[start, end]`.
    pub rows: usize,
    /// `p x pK` estimate; `None` when the segment cannot be refit.
    pub coefficients: Option<DMatrix<f64>>,
    /// Why `coefficients` is missing.
    pub warning: Option<Error>,
}

impl SegmentFit {
    pub fn is_ok(&self) -> bool {
        self.coefficients.is_some()
    }
}

fn check_breakpoints(n: usize, lag: usize, breakpoints: &[usize]) -> Result<()> {
    let mut prev = lag + 1;
    for &b in breakpoints {
        if b <= prev || b > n {
            return Err(Error::InvalidBreakpoints(format!(
                "{breakpoints:?} must be strictly increasing within [{}, {n}]",
                lag + 2
            )));
        }
        prev = b;
    }
    Ok(())
}

/// `(start, end)` of every segment implied by `breakpoints` on `1..=n`.
pub fn segment_bounds(n: usize, breakpoints: &[usize]) -> Vec<(usize, usize)> {
    let mut starts = vec![1];
    starts.extend_from_slice(breakpoints);
    let mut ends: Vec<usize> = breakpoints.iter().map(|b| b - 1).collect();
    ends.push(n);
    starts.into_iter().zip(ends).collect()
}

fn ols(
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    segment: usize,
) -> std::result::Result<DMatrix<f64>, Error> {
    let cols = x.ncols();
    let svd = x.svd(true, true);
    let max_sv = svd.singular_values.max();
    let cutoff = RANK_TOLERANCE * max_sv;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if rank < cols {
        return Err(Error::RankDeficient {
            segment,
            rank,
            required: cols,
        });
    }
    let b = svd
        .solve(&y, cutoff)
        .map_err(|e| Error::dim(e.to_string()))?;
    Ok(b.transpose())
}

/// Ordinary least squares of `x_t` on `(x_{t-1}, ..., x_{t-K})` within each
/// segment, using only rows whose lags stay inside the segment.
///
/// Segments with fewer than `pK + 1` such rows, or with rank-deficient
/// regressors, come back with `coefficients = None` and a warning naming the
/// segment (1-based). Invalid breakpoints are an error for the whole call.
pub fn refit_segments(
    series: &TimeSeries,
    breakpoints: &[usize],
    lag: usize,
) -> Result<Vec<SegmentFit>> {
    series.check_lag(lag)?;
    let n = series.n_times();
    check_breakpoints(n, lag, breakpoints)?;
    let p = series.dim();
    let x = series.data();
    let required = p * lag + 1;

    let fits = segment_bounds(n, breakpoints)
        .into_iter()
        .enumerate()
        .map(|(j, (start, end))| {
            let rows = (end + 1).saturating_sub(start + lag);
            let segment = j + 1;
            let mut fit = SegmentFit {
                start,
                end,
                rows,
                coefficients: None,
                warning: None,
            };
            if rows < required {
                fit.warning = Some(Error::SegmentTooShort {
                    segment,
                    rows,
                    required,
                });
                return fit;
            }
            // 0-based index of the first target is start - 1 + lag.
            let first = start - 1 + lag;
            let mut reg = DMatrix::zeros(rows, p * lag);
            let mut tgt = DMatrix::zeros(rows, p);
            for r in 0..rows {
                let t = first + r;
                tgt.row_mut(r).copy_from(&x.row(t));
                for k in 1..=lag {
                    reg.view_mut((r, (k - 1) * p), (1, p))
                        .copy_from(&x.row(t - k));
                }
            }
            match ols(reg, tgt, segment) {
                Ok(c) => fit.coefficients = Some(c),
                Err(e) => fit.warning = Some(e),
            }
            fit
        })
        .collect();
    Ok(fits)
}

/// Average fused coefficient `A_t` over the design rows whose target time
/// falls in each segment. `None` for segments with no such row.
pub fn fused_segment_coeffs(w: &DiffPath, breakpoints: &[usize]) -> Vec<Option<DMatrix<f64>>> {
    let path = w.to_coefficients();
    let lag = w.lag();
    let n = path.len() + lag;
    segment_bounds(n, breakpoints)
        .into_iter()
        .map(|(start, end)| {
            let lo = start.max(lag + 1);
            if lo > end {
                return None;
            }
            let blocks = &path.blocks()[lo - 1 - lag..end - lag];
            let sum = blocks
                .iter()
                .fold(DMatrix::zeros(w.dim(), w.dim() * lag), |acc, b| acc + b);
            Some(sum / blocks.len() as f64)
        })
        .collect()
}

/// Detected breaks, refits and solver diagnostics for one `lambda`.
#[derive(Clone, Debug)]
pub struct SegmentationResult {
    pub lambda: f64,
    pub threshold: f64,
    pub breakpoints: Vec<usize>,
    pub segments: Vec<SegmentFit>,
    /// Fused-path coefficients averaged over each segment.
    pub fused_coeffs: Vec<Option<DMatrix<f64>>>,
    /// Final sparse difference estimate `W`.
    pub theta_path: DiffPath,
    pub iterations: usize,
    pub primal_residuals: Vec<f64>,
    pub dual_residuals: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
}

impl SegmentationResult {
    pub fn from_solution(
        series: &TimeSeries,
        solution: AdmmSolution,
        config: &SolverConfig,
    ) -> Result<Self> {
        let w = solution.state.w;
        let breakpoints = detect_changepoints(&w, config.detect_threshold);
        let segments = refit_segments(series, &breakpoints, config.lag)?;
        let fused_coeffs = fused_segment_coeffs(&w, &breakpoints);
        Ok(Self {
            lambda: config.lambda,
            threshold: config.detect_threshold,
            breakpoints,
            segments,
            fused_coeffs,
            theta_path: w,
            iterations: solution.state.iteration,
            primal_residuals: solution.primal_residuals,
            dual_residuals: solution.dual_residuals,
            objective: solution.objective,
            converged: solution.converged,
        })
    }

    /// Refit coefficients, one entry per segment.
    pub fn segment_coeffs(&self) -> Vec<Option<&DMatrix<f64>>> {
        self.segments
            .iter()
            .map(|s| s.coefficients.as_ref())
            .collect()
    }

    /// Series time of each difference block, aligned with `block_norms`.
    pub fn block_times(&self) -> Vec<usize> {
        (0..self.theta_path.len())
            .map(|i| i + 1 + self.theta_path.lag())
            .collect()
    }

    pub fn block_norms(&self) -> Vec<f64> {
        self.theta_path.block_norms()
    }
}

/// Solves, detects and refits.
pub fn segment(series: &TimeSeries, config: &SolverConfig) -> Result<SegmentationResult> {
    segment_with_progress(series, config, |_| {})
}

pub fn segment_with_progress(
    series: &TimeSeries,
    config: &SolverConfig,
    progress: impl FnMut(&IterationInfo),
) -> Result<SegmentationResult> {
    let solution = admm::solve_with_progress(series, config, progress)?;
    SegmentationResult::from_solution(series, solution, config)
}
