// SPDX-License-Identifier: MIT OR Apache-2.0

//! Scaled-form ADMM for the group fused lasso over coefficient differences.
//!
//! The splitting keeps `theta` (difference path) in the smooth least-squares
//! term and `W` in the group penalty, coupled by `theta = W` with scaled dual
//! `Omega`. Each iteration performs
//!
//! 1. `theta <- argmin ||Y - X theta||^2 + rho/2 ||theta - W + Omega||^2`,
//!    solved row by row with the Kalman smoother,
//! 2. `W_1 <- theta_1 + Omega_1`, `W_t <- prox_{(lambda/rho)||.||_F}(theta_t + Omega_t)`,
//! 3. `Omega <- Omega + theta - W`.
//!
//! `W` is exactly sparse and is the reported estimate.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::kalman::SmootherSchedule;
use crate::path::DiffPath;
use crate::series::{LaggedDesign, TimeSeries};

/// Factor applied to `rho` by the optional adaptive policy.
const RHO_SCALE: f64 = 2.0;
/// Residual ratio that triggers a `rho` rescale.
const RHO_RATIO: f64 = 10.0;

/// Iterate of the solver.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmmState {
    pub theta: DiffPath,
    pub w: DiffPath,
    /// Scaled dual variables.
    pub omega: DiffPath,
    pub iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rho: f64,
}

impl AdmmState {
    pub fn zeros(design: &LaggedDesign, rho: f64) -> Self {
        let zero = DiffPath::zeros(design.n_rows(), design.dim(), design.lag());
        Self {
            theta: zero.clone(),
            w: zero.clone(),
            omega: zero,
            iteration: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            rho,
        }
    }
}

/// Per-iteration report passed to progress observers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationInfo {
    pub iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub rho: f64,
}

/// Output of [`solve`].
#[derive(Clone, Debug)]
pub struct AdmmSolution {
    pub design: LaggedDesign,
    /// Final state; `state.w` is the sparse estimate.
    pub state: AdmmState,
    pub primal_residuals: Vec<f64>,
    pub dual_residuals: Vec<f64>,
    pub converged: bool,
    /// Penalized objective evaluated at `W`.
    pub objective: f64,
}

impl AdmmSolution {
    /// The sparse difference estimate `W`.
    pub fn estimate(&self) -> &DiffPath {
        &self.state.w
    }

    pub fn iterations(&self) -> usize {
        self.state.iteration
    }
}

/// Group soft threshold: the proximal operator of `kappa * ||.||_F`.
///
/// Returns exactly zero when `||v||_F <= kappa`.
pub fn group_soft_threshold(v: &DMatrix<f64>, kappa: f64) -> DMatrix<f64> {
    debug_assert!(kappa >= 0.0);
    let norm = v.norm();
    if norm <= kappa || norm == 0.0 {
        DMatrix::zeros(v.nrows(), v.ncols())
    } else {
        v * (1.0 - kappa / norm)
    }
}

/// Penalized-block update. The first block is unpenalized and passes through.
pub fn w_update(theta: &DiffPath, omega: &DiffPath, lambda: f64, rho: f64) -> Result<DiffPath> {
    if !(rho > 0.0) {
        return Err(Error::InvalidConfig(format!("rho must be > 0, got {rho}")));
    }
    let mut v = theta.add(omega)?;
    let kappa = lambda / rho;
    for block in v.blocks_mut().iter_mut().skip(1) {
        *block = group_soft_threshold(block, kappa);
    }
    Ok(v)
}

/// Scaled dual ascent `Omega + theta - W`.
pub fn dual_update(omega: &DiffPath, theta: &DiffPath, w: &DiffPath) -> Result<DiffPath> {
    omega.add(&theta.sub(w)?)
}

/// Primal residual `||theta - W||_F` and dual residual `rho ||W - W_prev||_F`.
pub fn residuals(
    theta: &DiffPath,
    w: &DiffPath,
    w_prev: &DiffPath,
    rho: f64,
) -> Result<(f64, f64)> {
    Ok((theta.distance(w)?, rho * w.distance(w_prev)?))
}

/// Exact minimizer of the quadratic `theta` subproblem.
pub fn theta_update(
    design: &LaggedDesign,
    w: &DiffPath,
    omega: &DiffPath,
    rho: f64,
) -> Result<DiffPath> {
    let schedule = SmootherSchedule::new(design.regressors(), rho)?;
    theta_update_with(&schedule, design, w, omega)
}

/// [`theta_update`] with a precomputed smoother schedule for `(design, rho)`.
///
/// The `p` row problems run in parallel and share the schedule.
pub fn theta_update_with(
    schedule: &SmootherSchedule,
    design: &LaggedDesign,
    w: &DiffPath,
    omega: &DiffPath,
) -> Result<DiffPath> {
    w.check_same_shape(omega, "theta_update")?;
    let t_len = design.n_rows();
    let p = design.dim();
    let d = design.state_dim();
    if w.len() != t_len || w.dim() != p || w.lag() != design.lag() || schedule.len() != t_len {
        return Err(Error::dim(format!(
            "path of {} steps (p={}) vs design of {t_len} rows (p={p})",
            w.len(),
            w.dim()
        )));
    }

    let rows: Vec<DMatrix<f64>> = (0..p)
        .into_par_iter()
        .map(|j| {
            let mut bias = DMatrix::zeros(d, t_len);
            for (t, (wb, ob)) in w.blocks().iter().zip(omega.blocks()).enumerate() {
                for k in 0..d {
                    bias[(k, t)] = wb[(j, k)] - ob[(j, k)];
                }
            }
            let targets: Vec<f64> = design.targets().column(j).iter().copied().collect();
            schedule.smooth(&targets, &bias)
        })
        .collect();

    let mut coeffs = vec![DMatrix::zeros(p, d); t_len];
    for (j, states) in rows.iter().enumerate() {
        for (t, block) in coeffs.iter_mut().enumerate() {
            for k in 0..d {
                block[(j, k)] = states[(k, t)];
            }
        }
    }
    Ok(crate::path::CoefficientPath::new(coeffs, design.lag())?.to_diff())
}

/// Stopping thresholds `(eps_primal, eps_dual)` for the current iterate.
pub fn tolerances(state: &AdmmState, eps_abs: f64, eps_rel: f64) -> (f64, f64) {
    let w = &state.w;
    let n = (w.len() * w.dim() * w.dim() * w.lag()) as f64;
    let base = n.sqrt() * eps_abs;
    let eps_primal = base + eps_rel * state.theta.norm().max(w.norm());
    let eps_dual = base + eps_rel * state.rho * state.omega.norm();
    (eps_primal, eps_dual)
}

/// Runs ADMM on `series` until both residuals fall below their tolerances or
/// `max_iter` is reached. A run that hits the cap is returned with
/// `converged = false`.
pub fn solve(series: &TimeSeries, config: &SolverConfig) -> Result<AdmmSolution> {
    solve_with_progress(series, config, |_| {})
}

pub fn solve_with_progress(
    series: &TimeSeries,
    config: &SolverConfig,
    progress: impl FnMut(&IterationInfo),
) -> Result<AdmmSolution> {
    config.validate()?;
    series.check_lag(config.lag)?;
    let design = LaggedDesign::new(series, config.lag)?;
    solve_design(design, config, progress)
}

/// [`solve_with_progress`] on an already-built design.
pub fn solve_design(
    design: LaggedDesign,
    config: &SolverConfig,
    mut progress: impl FnMut(&IterationInfo),
) -> Result<AdmmSolution> {
    config.validate()?;
    if design.n_rows() < 2 {
        return Err(Error::SeriesTooShort {
            n_times: design.n_rows() + design.lag(),
            lag: design.lag(),
        });
    }
    let mut state = AdmmState::zeros(&design, config.rho);
    let mut schedule = SmootherSchedule::new(design.regressors(), state.rho)?;
    let mut primal_residuals = Vec::new();
    let mut dual_residuals = Vec::new();
    let mut converged = false;

    while state.iteration < config.max_iter {
        let theta = theta_update_with(&schedule, &design, &state.w, &state.omega)?;
        let w = w_update(&theta, &state.omega, config.lambda, state.rho)?;
        let omega = dual_update(&state.omega, &theta, &w)?;
        let (primal, dual) = residuals(&theta, &w, &state.w, state.rho)?;

        state.theta = theta;
        state.w = w;
        state.omega = omega;
        state.iteration += 1;
        state.primal_residual = primal;
        state.dual_residual = dual;
        primal_residuals.push(primal);
        dual_residuals.push(dual);

        let (eps_primal, eps_dual) = tolerances(&state, config.eps_abs, config.eps_rel);
        progress(&IterationInfo {
            iteration: state.iteration,
            primal_residual: primal,
            dual_residual: dual,
            eps_primal,
            eps_dual,
            rho: state.rho,
        });
        if primal <= eps_primal && dual <= eps_dual {
            converged = true;
            break;
        }

        if config.adaptive_rho {
            let factor = if primal > RHO_RATIO * dual {
                RHO_SCALE
            } else if dual > RHO_RATIO * primal {
                1.0 / RHO_SCALE
            } else {
                1.0
            };
            if factor != 1.0 {
                state.rho *= factor;
                // Scaled duals are y / rho.
                state.omega = state.omega.scale(1.0 / factor);
                schedule = SmootherSchedule::new(design.regressors(), state.rho)?;
            }
        }
    }

    let objective = state.w.objective(&design, config.lambda)?;
    Ok(AdmmSolution {
        design,
        state,
        primal_residuals,
        dual_residuals,
        converged,
        objective,
    })
}
