// SPDX-License-Identifier: MIT OR Apache-2.0

//! Row-wise solver for the quadratic coefficient-path update.
//!
//! For one output coordinate `j` the update minimizes
//!
//! ```text
//! sum_t (y_t - x~_t' a_t)^2 + (rho / 2) sum_t || a_t - a_{t-1} - mu_t ||^2,   a_0 = 0
//! ```
//!
//! which is the negative log-likelihood of the local-level model
//! `a_t = a_{t-1} + mu_t + N(0, I / rho)`, `y_t = x~_t' a_t + N(0, 1/2)`. The
//! minimizer is the posterior mean, computed here with a forward Kalman filter
//! and a backward Rauch-Tung-Striebel pass.
//!
//! The covariance recursions depend only on the regressors and `rho`, so they
//! are factored into a [`SmootherSchedule`] that is computed once and shared
//! by every row.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Observation noise variance of the equivalent state-space model.
pub const OBSERVATION_VARIANCE: f64 = 0.5;

/// Largest `T * pK` accepted by [`dense_row_solve`].
pub const DENSE_ROW_LIMIT: usize = 2000;

/// One row subproblem: targets `y_t = x_{t,j}`, lag vectors `x~_t` (rows of
/// `regressors`) and per-step drift `mu_t` (rows of `bias`).
#[derive(Clone, Debug, PartialEq)]
pub struct RowSmoothingProblem {
    pub targets: DVector<f64>,
    /// `T x pK`.
    pub regressors: DMatrix<f64>,
    /// `T x pK`; row `t` is `W_t[j, :] - Omega_t[j, :]`.
    pub bias: DMatrix<f64>,
    pub rho: f64,
}

impl RowSmoothingProblem {
    pub fn new(
        targets: DVector<f64>,
        regressors: DMatrix<f64>,
        bias: DMatrix<f64>,
        rho: f64,
    ) -> Result<Self> {
        let t = targets.len();
        if t == 0 {
            return Err(Error::dim("row problem needs at least one time step"));
        }
        if regressors.nrows() != t || bias.nrows() != t || bias.ncols() != regressors.ncols() {
            return Err(Error::dim(format!(
                "targets {t}, regressors {:?}, bias {:?}",
                regressors.shape(),
                bias.shape()
            )));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidConfig(format!("rho must be > 0, got {rho}")));
        }
        let all_finite = targets
            .iter()
            .chain(regressors.iter())
            .chain(bias.iter())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::dim("row problem contains non-finite values"));
        }
        Ok(Self {
            targets,
            regressors,
            bias,
            rho,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.regressors.ncols()
    }

    /// Value of the row objective at `states` (`T x pK`, row `t` = `a_t`).
    pub fn objective(&self, states: &DMatrix<f64>) -> f64 {
        let mut fit = 0.0;
        let mut fusion = 0.0;
        for t in 0..self.len() {
            let a = states.row(t);
            fit += (self.targets[t] - self.regressors.row(t).dot(&a)).powi(2);
            let prev_sq: f64 = (0..self.state_dim())
                .map(|k| {
                    let prev = if t == 0 { 0.0 } else { states[(t - 1, k)] };
                    (a[k] - prev - self.bias[(t, k)]).powi(2)
                })
                .sum();
            fusion += prev_sq;
        }
        fit + 0.5 * self.rho * fusion
    }

    /// Gradient of [`Self::objective`] at `states`, same layout.
    pub fn gradient(&self, states: &DMatrix<f64>) -> DMatrix<f64> {
        let (t_len, d) = (self.len(), self.state_dim());
        let mut grad = DMatrix::zeros(t_len, d);
        for t in 0..t_len {
            let r = self.targets[t] - self.regressors.row(t).dot(&states.row(t));
            for k in 0..d {
                grad[(t, k)] -= 2.0 * r * self.regressors[(t, k)];
                let prev = if t == 0 { 0.0 } else { states[(t - 1, k)] };
                let diff = states[(t, k)] - prev - self.bias[(t, k)];
                grad[(t, k)] += self.rho * diff;
                if t > 0 {
                    grad[(t - 1, k)] -= self.rho * diff;
                }
            }
        }
        grad
    }
}

/// Smoothed states for one row.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedRow {
    /// `T x pK`; row `t` is the smoothed state `a_t`.
    pub states: DMatrix<f64>,
    /// Smoothed covariances, when requested.
    pub covariances: Option<Vec<DMatrix<f64>>>,
}

/// `(predicted, filtered)` covariance per step.
type CovarianceTrace = (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>);

/// Data-independent part of the filter and smoother: Kalman gains and
/// backward gains for a fixed set of regressors and `rho`.
#[derive(Clone, Debug)]
pub struct SmootherSchedule {
    /// `pK x T`; column `t` is `x~_t`.
    regressors: DMatrix<f64>,
    /// `pK x T`; column `t` is the Kalman gain at step `t`.
    gains: DMatrix<f64>,
    /// `back_gains[t] = Sigma_{t|t} Sigma_{t+1|t}^{-1}` for `t < T - 1`.
    back_gains: Vec<DMatrix<f64>>,
    /// Predicted and filtered covariances, kept only on request.
    covariances: Option<CovarianceTrace>,
    rho: f64,
}

impl SmootherSchedule {
    /// `regressors` is `T x pK` (one lag vector per row).
    pub fn new(regressors: &DMatrix<f64>, rho: f64) -> Result<Self> {
        Self::build(regressors, rho, false)
    }

    /// Like [`Self::new`] but keeps every predicted and filtered covariance
    /// so that smoothed covariances can be reported.
    pub fn with_covariances(regressors: &DMatrix<f64>, rho: f64) -> Result<Self> {
        Self::build(regressors, rho, true)
    }

    fn build(regressors: &DMatrix<f64>, rho: f64, keep: bool) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidConfig(format!("rho must be > 0, got {rho}")));
        }
        let t_len = regressors.nrows();
        let d = regressors.ncols();
        if t_len == 0 || d == 0 {
            return Err(Error::dim("schedule needs at least one step and one state"));
        }
        let xt = regressors.transpose();
        let step_var = 1.0 / rho;
        let mut gains = DMatrix::zeros(d, t_len);
        let mut back_gains = Vec::with_capacity(t_len - 1);
        let mut kept = keep.then(|| (Vec::with_capacity(t_len), Vec::with_capacity(t_len)));

        // Prior for a_1 given a_0 = 0.
        let mut predicted = DMatrix::<f64>::identity(d, d) * step_var;
        for t in 0..t_len {
            let x = xt.column(t);
            let px = &predicted * x;
            let innovation_var = OBSERVATION_VARIANCE + x.dot(&px);
            let gain = &px / innovation_var;
            let mut filtered = &predicted - &gain * px.transpose();
            symmetrize(&mut filtered);
            debug_assert!(
                is_positive_definite(&filtered),
                "filtered covariance lost definiteness at step {t}"
            );
            gains.set_column(t, &gain);

            let next = (t + 1 < t_len).then(|| {
                let mut next = filtered.clone();
                for k in 0..d {
                    next[(k, k)] += step_var;
                }
                next
            });
            if let Some(next) = &next {
                let chol = next
                    .clone()
                    .cholesky()
                    .ok_or(Error::SingularCovariance { time: t + 2 })?;
                // Sigma_{t+1|t} X = Sigma_{t|t}  =>  C_t = X'.
                back_gains.push(chol.solve(&filtered).transpose());
            }
            if let Some((pred, filt)) = kept.as_mut() {
                pred.push(predicted.clone());
                filt.push(filtered.clone());
            }
            if let Some(next) = next {
                predicted = next;
            }
        }
        Ok(Self {
            regressors: xt,
            gains,
            back_gains,
            covariances: kept,
            rho,
        })
    }

    pub fn len(&self) -> usize {
        self.gains.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.ncols() == 0
    }

    pub fn state_dim(&self) -> usize {
        self.gains.nrows()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Runs the forward filter and backward smoother for one row.
    ///
    /// `targets` has length `T`; `bias` is `pK x T` with column `t` holding
    /// `mu_t`. Returns `pK x T` smoothed states.
    pub fn smooth(&self, targets: &[f64], bias: &DMatrix<f64>) -> DMatrix<f64> {
        let t_len = self.len();
        let d = self.state_dim();
        debug_assert_eq!(targets.len(), t_len);
        debug_assert_eq!(bias.shape(), (d, t_len));

        let mut states = DMatrix::zeros(d, t_len);
        let mut pred = DVector::zeros(d);
        for t in 0..t_len {
            if t == 0 {
                pred.copy_from(&bias.column(0));
            } else {
                pred.copy_from(&states.column(t - 1));
                pred += bias.column(t);
            }
            let innovation = targets[t] - self.regressors.column(t).dot(&pred);
            let mut col = states.column_mut(t);
            col.copy_from(&pred);
            col.axpy(innovation, &self.gains.column(t), 1.0);
        }

        // states[:, t] holds the filtered mean until overwritten below.
        let mut diff = DVector::zeros(d);
        for t in (0..t_len.saturating_sub(1)).rev() {
            // smoothed_{t+1} - predicted_{t+1}, with predicted_{t+1} = filtered_t + mu_{t+1}.
            diff.copy_from(&states.column(t + 1));
            diff -= states.column(t);
            diff -= bias.column(t + 1);
            let correction = &self.back_gains[t] * &diff;
            let mut col = states.column_mut(t);
            col += correction;
        }
        states
    }

    /// Smoothed covariances `Sigma_t`; `None` unless built with
    /// [`Self::with_covariances`].
    pub fn smoothed_covariances(&self) -> Option<Vec<DMatrix<f64>>> {
        let (pred, filt) = self.covariances.as_ref()?;
        let t_len = self.len();
        let mut out = filt.clone();
        for t in (0..t_len.saturating_sub(1)).rev() {
            let c = &self.back_gains[t];
            let mut s = &filt[t] + c * (&out[t + 1] - &pred[t + 1]) * c.transpose();
            symmetrize(&mut s);
            out[t] = s;
        }
        Some(out)
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    m.clone().symmetric_eigenvalues().iter().all(|&v| v > 0.0)
}

/// Exact minimizer of the row objective via forward filtering and backward
/// Rauch-Tung-Striebel smoothing. Linear in `T`.
pub fn smooth_row(problem: &RowSmoothingProblem) -> Result<SmoothedRow> {
    smooth_row_inner(problem, false)
}

/// [`smooth_row`] that also reports the smoothed covariances.
pub fn smooth_row_with_covariances(problem: &RowSmoothingProblem) -> Result<SmoothedRow> {
    smooth_row_inner(problem, true)
}

fn smooth_row_inner(problem: &RowSmoothingProblem, keep: bool) -> Result<SmoothedRow> {
    let schedule = SmootherSchedule::build(&problem.regressors, problem.rho, keep)?;
    let bias = problem.bias.transpose();
    let states = schedule
        .smooth(problem.targets.as_slice(), &bias)
        .transpose();
    Ok(SmoothedRow {
        states,
        covariances: schedule.smoothed_covariances(),
    })
}

/// Reference solution of the row objective by a dense solve of its normal
/// equations. Intended for verification on small instances.
pub fn dense_row_solve(problem: &RowSmoothingProblem) -> Result<SmoothedRow> {
    let t_len = problem.len();
    let d = problem.state_dim();
    let n = t_len * d;
    if n > DENSE_ROW_LIMIT {
        return Err(Error::TooLarge {
            size: n,
            limit: DENSE_ROW_LIMIT,
        });
    }
    let rho = problem.rho;
    let mut hessian = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for t in 0..t_len {
        let x = problem.regressors.row(t);
        let base = t * d;
        for a in 0..d {
            rhs[base + a] += 2.0 * problem.targets[t] * x[a];
            for b in 0..d {
                hessian[(base + a, base + b)] += 2.0 * x[a] * x[b];
            }
        }
        // Fusion term (rho/2)||a_t - a_{t-1} - mu_t||^2.
        for k in 0..d {
            let i = base + k;
            hessian[(i, i)] += rho;
            rhs[i] += rho * problem.bias[(t, k)];
            if t > 0 {
                let j = i - d;
                hessian[(j, j)] += rho;
                hessian[(i, j)] -= rho;
                hessian[(j, i)] -= rho;
                rhs[j] -= rho * problem.bias[(t, k)];
            }
        }
    }
    let solution = hessian
        .cholesky()
        .ok_or_else(|| Error::dim("row normal equations are not positive definite"))?
        .solve(&rhs);
    let states = DMatrix::from_row_slice(t_len, d, solution.as_slice());
    Ok(SmoothedRow {
        states,
        covariances: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(rng: &mut ChaCha8Rng, t: usize, d: usize, rho: f64) -> RowSmoothingProblem {
        let mut g = || rng.random_range(-1.0..1.0);
        let targets = DVector::from_fn(t, |_, _| g());
        let regressors = DMatrix::from_fn(t, d, |_, _| g());
        let bias = DMatrix::from_fn(t, d, |_, _| 0.3 * g());
        RowSmoothingProblem::new(targets, regressors, bias, rho).unwrap()
    }

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn single_step_closed_form() {
        let x = DMatrix::from_row_slice(1, 2, &[0.7, -1.3]);
        let mu = DMatrix::from_row_slice(1, 2, &[0.2, 0.5]);
        let rho = 2.0;
        let y = 1.4;
        let p = RowSmoothingProblem::new(DVector::from_element(1, y), x.clone(), mu.clone(), rho)
            .unwrap();
        let got = smooth_row(&p).unwrap().states;
        // Prior N(mu, I/rho), one scalar measurement with variance 1/2.
        let xv = x.row(0).transpose();
        let muv = mu.row(0).transpose();
        let gain = &xv / rho / (0.5 + xv.norm_squared() / rho);
        let want = &muv + gain * (y - xv.dot(&muv));
        assert!(max_abs_diff(&got, &DMatrix::from_row_slice(1, 2, want.as_slice())) < 1e-14);
        assert!(dense_row_solve(&p)
            .unwrap()
            .states
            .relative_eq(&got, 1e-12, 1e-12));
    }

    #[test]
    fn zero_data_is_fixed_point() {
        let p = RowSmoothingProblem::new(
            DVector::zeros(7),
            DMatrix::from_fn(7, 3, |i, j| (i + j) as f64 * 0.1),
            DMatrix::zeros(7, 3),
            1.0,
        )
        .unwrap();
        assert!(smooth_row(&p).unwrap().states.iter().all(|&v| v == 0.0));
        assert!(dense_row_solve(&p)
            .unwrap()
            .states
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn matches_dense_solution_small() {
        // p = 2, K = 1, T = 6, rho = 1.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_problem(&mut rng, 6, 2, 1.0);
        let fast = smooth_row(&p).unwrap().states;
        let dense = dense_row_solve(&p).unwrap().states;
        assert!(max_abs_diff(&fast, &dense) <= 1e-8);
    }

    #[test]
    fn dense_solution_is_stationary_and_minimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_problem(&mut rng, 9, 3, 0.7);
        let sol = dense_row_solve(&p).unwrap().states;
        let g = p.gradient(&sol);
        assert!(g.amax() <= 1e-9, "gradient {}", g.amax());
        let f0 = p.objective(&sol);
        for _ in 0..100 {
            let pert = DMatrix::from_fn(9, 3, |_, _| rng.random_range(-1e-3..1e-3));
            assert!(p.objective(&(&sol + pert)) >= f0);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_problem(&mut rng, 4, 2, 3.0);
        let at = DMatrix::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
        let g = p.gradient(&at);
        let h = 1e-6;
        for i in 0..4 {
            for k in 0..2 {
                let mut up = at.clone();
                up[(i, k)] += h;
                let mut dn = at.clone();
                dn[(i, k)] -= h;
                let fd = (p.objective(&up) - p.objective(&dn)) / (2.0 * h);
                assert!((fd - g[(i, k)]).abs() < 1e-6, "{fd} vs {}", g[(i, k)]);
            }
        }
    }

    #[test]
    fn dense_guard() {
        let p = RowSmoothingProblem::new(
            DVector::zeros(501),
            DMatrix::zeros(501, 4),
            DMatrix::zeros(501, 4),
            1.0,
        )
        .unwrap();
        assert!(matches!(
            dense_row_solve(&p),
            Err(Error::TooLarge { size: 2004, .. })
        ));
        assert!(smooth_row(&p).is_ok());
    }

    #[test]
    fn oracle_equivalence_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..60 {
            let d = 1 + case % 6;
            let t = 1 + (case * 7) % 50;
            let rho = [0.1, 1.0, 10.0][case % 3];
            let p = random_problem(&mut rng, t, d, rho);
            let fast = smooth_row(&p).unwrap().states;
            let dense = dense_row_solve(&p).unwrap().states;
            let err = max_abs_diff(&fast, &dense);
            assert!(err <= 1e-7, "case {case}: T={t} pK={d} rho={rho} err={err}");
            assert!(p.gradient(&fast).amax() <= 1e-6);
        }
    }

    #[test]
    fn covariances_are_symmetric_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_problem(&mut rng, 20, 4, 0.5);
        let row = smooth_row_with_covariances(&p).unwrap();
        let covs = row.covariances.unwrap();
        assert_eq!(covs.len(), 20);
        for c in &covs {
            assert_eq!(c, &c.transpose());
            assert!(is_positive_definite(c));
        }
        // The row objective is the negative log-likelihood, so the smoothed
        // covariances are the diagonal blocks of its inverse Hessian.
        let n = 20 * 4;
        let g0 = p.gradient(&DMatrix::zeros(20, 4));
        let mut hessian = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut e = DMatrix::zeros(20, 4);
            e[(i / 4, i % 4)] = 1.0;
            let col = p.gradient(&e) - &g0;
            for r in 0..n {
                hessian[(r, i)] = col[(r / 4, r % 4)];
            }
        }
        let inv = hessian.try_inverse().unwrap();
        for (t, c) in covs.iter().enumerate() {
            let block = inv.view((4 * t, 4 * t), (4, 4));
            assert!(max_abs_diff(c, &block.into_owned()) < 1e-10, "step {t}");
        }
    }

    #[test]
    fn rejects_bad_problem() {
        let e = RowSmoothingProblem::new(
            DVector::zeros(2),
            DMatrix::zeros(3, 1),
            DMatrix::zeros(2, 1),
            1.0,
        );
        assert!(matches!(e, Err(Error::Dimension(_))));
        let e = RowSmoothingProblem::new(
            DVector::zeros(2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 1),
            0.0,
        );
        assert!(matches!(e, Err(Error::InvalidConfig(_))));
    }
}
