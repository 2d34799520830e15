// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RHO: f64 = 1.0;
pub const DEFAULT_EPS_ABS: f64 = 1e-6;
pub const DEFAULT_EPS_REL: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 5000;
pub const DEFAULT_DETECT_THRESHOLD: f64 = 0.005;

/// Solver and detection settings for one penalty value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Group fused lasso penalty.
    pub lambda: f64,
    /// ADMM augmented-Lagrangian penalty.
    pub rho: f64,
    /// VAR lag order `K`.
    pub lag: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    /// Frobenius-norm cutoff on a difference block for reporting a break.
    pub detect_threshold: f64,
    pub seed: Option<u64>,
    /// Rescale `rho` by 2 when one residual exceeds the other tenfold.
    pub adaptive_rho: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            rho: DEFAULT_RHO,
            lag: 1,
            eps_abs: DEFAULT_EPS_ABS,
            eps_rel: DEFAULT_EPS_REL,
            max_iter: DEFAULT_MAX_ITER,
            detect_threshold: DEFAULT_DETECT_THRESHOLD,
            seed: None,
            adaptive_rho: false,
        }
    }
}

impl SolverConfig {
    pub fn new(lambda: f64, lag: usize) -> Self {
        Self {
            lambda,
            lag,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            ));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be finite and > 0, got {}", self.rho));
        }
        if self.lag == 0 {
            return bad("lag must be >= 1".into());
        }
        if !(self.eps_abs > 0.0) || !(self.eps_rel > 0.0) {
            return bad(format!(
                "tolerances must be > 0, got eps_abs={} eps_rel={}",
                self.eps_abs, self.eps_rel
            ));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1".into());
        }
        if !(self.detect_threshold > 0.0) {
            return bad(format!(
                "detect_threshold must be > 0, got {}",
                self.detect_threshold
            ));
        }
        Ok(())
    }
}
