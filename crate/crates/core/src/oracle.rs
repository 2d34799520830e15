// SPDX-License-Identifier: MIT OR Apache-2.0

//! Slow reference solvers for verification.
//!
//! Everything here works directly in the difference parameterization with the
//! explicit lower-triangular design `X` (row `t` repeats `x~_t'` in every
//! block column `s <= t`), and shares no numerical code with the smoother or
//! the ADMM loop. Sizes are capped; these are meant for small instances.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::path::DiffPath;
use crate::series::LaggedDesign;

/// Largest `p * pK * T` accepted by the dense oracles.
pub const DENSE_LIMIT: usize = 5000;

/// Ridge added to `X'X` when a dense least-squares solve is needed.
pub const LEAST_SQUARES_RIDGE: f64 = 1e-10;

fn check_size(design: &LaggedDesign) -> Result<()> {
    let size = design.dim() * design.state_dim() * design.n_rows();
    if size > DENSE_LIMIT {
        return Err(Error::TooLarge {
            size,
            limit: DENSE_LIMIT,
        });
    }
    Ok(())
}

/// The `T x T*pK` cumulative design matrix.
pub fn design_matrix(design: &LaggedDesign) -> DMatrix<f64> {
    let t_len = design.n_rows();
    let d = design.state_dim();
    let x = design.regressors();
    let mut out = DMatrix::zeros(t_len, t_len * d);
    for t in 0..t_len {
        for s in 0..=t {
            for k in 0..d {
                out[(t, s * d + k)] = x[(t, k)];
            }
        }
    }
    out
}

/// Stack a difference path as a `T*pK x p` matrix: column `j`, block `s`
/// holds row `j` of `theta_s`.
fn stack(path: &DiffPath) -> DMatrix<f64> {
    let d = path.dim() * path.lag();
    let p = path.dim();
    let mut out = DMatrix::zeros(path.len() * d, p);
    for (s, b) in path.blocks().iter().enumerate() {
        for j in 0..p {
            for k in 0..d {
                out[(s * d + k, j)] = b[(j, k)];
            }
        }
    }
    out
}

fn unstack(stacked: &DMatrix<f64>, p: usize, lag: usize) -> DiffPath {
    let d = p * lag;
    let t_len = stacked.nrows() / d;
    let blocks = (0..t_len)
        .map(|s| DMatrix::from_fn(p, d, |j, k| stacked[(s * d + k, j)]))
        .collect();
    DiffPath::new(blocks, lag).expect("stacked shape is consistent")
}

/// Frobenius norms of the penalized groups `t >= 2` of a stacked variable.
fn group_penalty(stacked: &DMatrix<f64>, d: usize) -> f64 {
    (1..stacked.nrows() / d)
        .map(|s| stacked.rows(s * d, d).norm())
        .sum()
}

/// `||Y - X theta||_F^2 + lambda * sum_{t>=2} ||theta_t||_F` computed with
/// the explicit design matrix.
pub fn reparam_objective(design: &LaggedDesign, theta: &DiffPath, lambda: f64) -> Result<f64> {
    check_size(design)?;
    if theta.len() != design.n_rows() || theta.dim() != design.dim() || theta.lag() != design.lag()
    {
        return Err(Error::dim("theta does not match design"));
    }
    let x = design_matrix(design);
    let stacked = stack(theta);
    let resid = design.targets() - &x * &stacked;
    Ok(resid.norm_squared() + lambda * group_penalty(&stacked, design.state_dim()))
}

/// Exact minimizer of `||Y - X theta||^2 + rho/2 ||theta - W + Omega||^2` by
/// dense normal equations.
pub fn dense_global_solve(
    design: &LaggedDesign,
    w: &DiffPath,
    omega: &DiffPath,
    rho: f64,
) -> Result<DiffPath> {
    check_size(design)?;
    if !(rho > 0.0) {
        return Err(Error::InvalidConfig(format!("rho must be > 0, got {rho}")));
    }
    if w.len() != design.n_rows() || omega.len() != design.n_rows() || w.dim() != design.dim() {
        return Err(Error::dim("w/omega do not match design"));
    }
    let x = design_matrix(design);
    let n = x.ncols();
    let mut h = x.transpose() * &x * 2.0;
    for i in 0..n {
        h[(i, i)] += rho;
    }
    let center = stack(w) - stack(omega);
    let rhs = x.transpose() * design.targets() * 2.0 + center * rho;
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::dim("global normal equations are not positive definite"))?;
    Ok(unstack(&chol.solve(&rhs), design.dim(), design.lag()))
}

/// Gradient of the global quadratic at `theta`, as a difference path.
pub fn global_gradient(
    design: &LaggedDesign,
    w: &DiffPath,
    omega: &DiffPath,
    rho: f64,
    theta: &DiffPath,
) -> Result<DiffPath> {
    check_size(design)?;
    let x = design_matrix(design);
    let th = stack(theta);
    let g =
        x.transpose() * (&x * &th - design.targets()) * 2.0 + (th - stack(w) + stack(omega)) * rho;
    Ok(unstack(&g, design.dim(), design.lag()))
}

/// Ridge-regularized least-squares fit of `Y ~ X theta` (no penalty).
pub fn dense_least_squares(design: &LaggedDesign) -> Result<DiffPath> {
    check_size(design)?;
    let x = design_matrix(design);
    let mut h = x.transpose() * &x;
    for i in 0..h.nrows() {
        h[(i, i)] += LEAST_SQUARES_RIDGE;
    }
    let rhs = x.transpose() * design.targets();
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::dim("least-squares normal equations are not positive definite"))?;
    Ok(unstack(&chol.solve(&rhs), design.dim(), design.lag()))
}

/// Result of [`proximal_gradient_reference`].
#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    pub theta: DiffPath,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Accelerated proximal gradient (FISTA with function-value restart) on the
/// difference-parameterized group lasso, step `1/L` with `L` the largest
/// eigenvalue of `2 X'X`. Stops when the objective changes by at most
/// `tol * (1 + |F|)` over a full window of iterations.
pub fn proximal_gradient_reference(
    design: &LaggedDesign,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ReferenceSolution> {
    check_size(design)?;
    const WINDOW: usize = 50;
    let d = design.state_dim();
    let x = design_matrix(design);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * design.targets();
    let lipschitz = 2.0
        * xtx
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0f64, |m, &v| m.max(v));
    if lipschitz <= 0.0 {
        return Err(Error::dim("design is identically zero"));
    }
    let step = 1.0 / lipschitz;
    let y_sq = design.targets().norm_squared();

    // ||Y - X th||^2 = ||Y||^2 - 2 <th, X'Y> + <th, X'X th>
    let value = |th: &DMatrix<f64>| -> f64 {
        let smooth = y_sq - 2.0 * th.dot(&xty) + th.dot(&(&xtx * th));
        smooth.max(0.0) + lambda * group_penalty(th, d)
    };
    let prox = |v: DMatrix<f64>| -> DMatrix<f64> {
        let mut v = v;
        let kappa = lambda * step;
        for s in 1..v.nrows() / d {
            let mut block = v.rows_mut(s * d, d);
            let norm = block.norm();
            if norm <= kappa {
                block.fill(0.0);
            } else {
                block *= 1.0 - kappa / norm;
            }
        }
        v
    };

    let mut theta = DMatrix::zeros(x.ncols(), design.dim());
    let mut momentum = theta.clone();
    let mut t_k = 1.0f64;
    let mut f = value(&theta);
    let mut history: Vec<f64> = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let grad = (&xtx * &momentum - &xty) * 2.0;
        let next = prox(&momentum - grad * step);
        let f_next = value(&next);
        if f_next > f {
            if t_k == 1.0 {
                // A plain proximal step from the iterate no longer decreases
                // the objective: converged to rounding level.
                converged = true;
                break;
            }
            // Restart from the last iterate with plain proximal gradient.
            t_k = 1.0;
            momentum.copy_from(&theta);
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt());
        momentum = &next + (&next - &theta) * ((t_k - 1.0) / t_next);
        theta = next;
        t_k = t_next;
        f = f_next;
        history.push(f);
        if history.len() > WINDOW {
            let old = history[history.len() - 1 - WINDOW];
            if (old - f).abs() <= tol * (1.0 + f.abs()) {
                converged = true;
                break;
            }
        }
    }
    let theta = unstack(&theta, design.dim(), design.lag());
    let objective = reparam_objective(design, &theta, lambda)?;
    Ok(ReferenceSolution {
        theta,
        objective,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::TimeSeries;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_design(seed: u64, n: usize, p: usize, lag: usize) -> LaggedDesign {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s =
            TimeSeries::new(DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        LaggedDesign::new(&s, lag).unwrap()
    }

    #[test]
    fn design_matrix_is_cumulative() {
        let s = TimeSeries::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]).unwrap();
        let d = LaggedDesign::new(&s, 1).unwrap();
        let x = design_matrix(&d);
        let want = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 2.0, 2.0, 0.0, 3.0, 3.0, 3.0]);
        assert_eq!(x, want);
    }

    #[test]
    fn reparam_objective_agrees_with_path_objective() {
        let d = random_design(1, 12, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta = DiffPath::new(
            (0..d.n_rows())
                .map(|_| DMatrix::from_fn(2, 4, |_, _| rng.random_range(-1.0..1.0)))
                .collect(),
            2,
        )
        .unwrap();
        let a = reparam_objective(&d, &theta, 0.7).unwrap();
        let b = theta.objective(&d, 0.7).unwrap();
        assert!((a - b).abs() < 1e-10 * (1.0 + a));
    }

    #[test]
    fn dense_global_zero_instance() {
        let s = TimeSeries::new(DMatrix::zeros(7, 2)).unwrap();
        let d = LaggedDesign::new(&s, 1).unwrap();
        let z = DiffPath::zeros(6, 2, 1);
        let out = dense_global_solve(&d, &z, &z, 1.0).unwrap();
        assert!(out.blocks().iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn dense_global_is_stationary() {
        let d = random_design(3, 9, 2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut r = || {
            DiffPath::new(
                (0..8)
                    .map(|_| DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0)))
                    .collect(),
                1,
            )
            .unwrap()
        };
        let (w, omega) = (r(), r());
        let theta = dense_global_solve(&d, &w, &omega, 2.0).unwrap();
        let g = global_gradient(&d, &w, &omega, 2.0, &theta).unwrap();
        assert!(g.blocks().iter().all(|b| b.amax() <= 1e-9));
    }

    #[test]
    fn size_guard() {
        let d = random_design(5, 400, 4, 1);
        assert!(matches!(
            dense_least_squares(&d),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn zero_lambda_reaches_least_squares() {
        let d = random_design(6, 10, 1, 1);
        let ls = dense_least_squares(&d).unwrap();
        let ls_obj = reparam_objective(&d, &ls, 0.0).unwrap();
        let r = proximal_gradient_reference(&d, 0.0, 1e-14, 400_000).unwrap();
        assert!(
            (r.objective - ls_obj).abs() <= 1e-8,
            "{} vs {ls_obj}",
            r.objective
        );
    }

    #[test]
    fn huge_lambda_fuses_everything() {
        let d = random_design(7, 15, 2, 1);
        let r = proximal_gradient_reference(&d, 1e6, 1e-12, 100_000).unwrap();
        assert!(r.theta.blocks()[1..]
            .iter()
            .all(|b| b.iter().all(|&v| v == 0.0)));
    }
}
