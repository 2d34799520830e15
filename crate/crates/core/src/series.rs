// SPDX-License-Identifier: MIT OR Apache-2.0

//! Observed series and the lagged regression design built from it.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An `N x p` matrix of observations; row `t` is the observation at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    data: DMatrix<f64>,
}

impl TimeSeries {
    /// Wraps an `N x p` matrix. Every entry must be finite and both
    /// dimensions must be positive.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::dim(format!(
                "series must be non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        for row in 0..data.nrows() {
            for column in 0..data.ncols() {
                if !data[(row, column)].is_finite() {
                    return Err(Error::NonFinite { row, column });
                }
            }
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::dim(format!(
                "row {i} has {} columns, expected {p}",
                r.len()
            )));
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn n_times(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    /// Checks that a lag-`lag` fit has at least one regression row and one
    /// penalized difference.
    pub fn check_lag(&self, lag: usize) -> Result<()> {
        if lag == 0 {
            return Err(Error::InvalidConfig("lag order must be >= 1".into()));
        }
        if self.n_times() < lag + 2 {
            return Err(Error::SeriesTooShort {
                n_times: self.n_times(),
                lag,
            });
        }
        Ok(())
    }
}

/// Lagged regression design: for every usable time `t = K+1..N` the target
/// `x_t` and the stacked lag vector `(x_{t-1}, ..., x_{t-K})`.
///
/// Rows are indexed `0..T` with `T = N - K`. Row `i` corresponds to the
/// 1-based series time `i + 1 + t_offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaggedDesign {
    regressors: DMatrix<f64>,
    targets: DMatrix<f64>,
    lag: usize,
    t_offset: usize,
}

impl LaggedDesign {
    /// Requires `N >= K + 1` so at least one regression row exists; the
    /// solver separately requires `N >= K + 2`.
    pub fn new(series: &TimeSeries, lag: usize) -> Result<Self> {
        if lag == 0 {
            return Err(Error::InvalidConfig("lag order must be >= 1".into()));
        }
        if series.n_times() <= lag {
            return Err(Error::SeriesTooShort {
                n_times: series.n_times(),
                lag,
            });
        }
        let n = series.n_times();
        let p = series.dim();
        let x = series.data();
        let rows = n - lag;
        let mut regressors = DMatrix::zeros(rows, p * lag);
        let mut targets = DMatrix::zeros(rows, p);
        for i in 0..rows {
            let t = i + lag;
            targets.row_mut(i).copy_from(&x.row(t));
            for k in 1..=lag {
                regressors
                    .view_mut((i, (k - 1) * p), (1, p))
                    .copy_from(&x.row(t - k));
            }
        }
        Ok(Self {
            regressors,
            targets,
            lag,
            t_offset: lag,
        })
    }

    /// Builds a design from pre-assembled regressors and targets.
    pub fn from_parts(regressors: DMatrix<f64>, targets: DMatrix<f64>, lag: usize) -> Result<Self> {
        if lag == 0 || targets.ncols() == 0 {
            return Err(Error::dim("design needs positive lag and dimension"));
        }
        if regressors.nrows() != targets.nrows() || regressors.ncols() != targets.ncols() * lag {
            return Err(Error::dim(format!(
                "regressors {}x{} incompatible with targets {}x{} at lag {lag}",
                regressors.nrows(),
                regressors.ncols(),
                targets.nrows(),
                targets.ncols()
            )));
        }
        if regressors.nrows() == 0 {
            return Err(Error::dim("design has no rows"));
        }
        Ok(Self {
            regressors,
            targets,
            lag,
            t_offset: lag,
        })
    }

    /// `T x pK`; row `i` is the lag vector, most recent lag first.
    pub fn regressors(&self) -> &DMatrix<f64> {
        &self.regressors
    }

    /// `T x p`; row `i` is the target observation.
    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn n_rows(&self) -> usize {
        self.targets.nrows()
    }

    pub fn dim(&self) -> usize {
        self.targets.ncols()
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    /// Width `pK` of a lag vector.
    pub fn state_dim(&self) -> usize {
        self.regressors.ncols()
    }

    pub fn t_offset(&self) -> usize {
        self.t_offset
    }

    /// 1-based series time for design row `index`.
    pub fn series_time(&self, index: usize) -> usize {
        index + 1 + self.t_offset
    }
}
