// SPDX-License-Identifier: MIT OR Apache-2.0

//! Time-indexed coefficient paths and the penalized least-squares objective.
//!
//! A [`CoefficientPath`] holds one `p x pK` matrix `A_t` per usable time step,
//! lag-1 block leftmost. A [`DiffPath`] holds the successive differences
//! `theta_1 = A_1`, `theta_t = A_t - A_{t-1}`; the ADMM splitting variable and
//! scaled duals share that shape.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::series::LaggedDesign;

fn check_blocks(blocks: &[DMatrix<f64>], lag: usize) -> Result<()> {
    if lag == 0 {
        return Err(Error::dim("lag must be positive"));
    }
    let Some(first) = blocks.first() else {
        return Err(Error::dim("path must have at least one block"));
    };
    let (p, w) = first.shape();
    if p == 0 || w != p * lag {
        return Err(Error::dim(format!(
            "block shape {p}x{w} is not p x pK for K={lag}"
        )));
    }
    if let Some((t, b)) = blocks.iter().enumerate().find(|(_, b)| b.shape() != (p, w)) {
        return Err(Error::dim(format!(
            "block {t} has shape {:?}, expected {:?}",
            b.shape(),
            (p, w)
        )));
    }
    Ok(())
}

macro_rules! path_common {
    ($name:ident) => {
        impl $name {
            pub fn new(blocks: Vec<DMatrix<f64>>, lag: usize) -> Result<Self> {
                check_blocks(&blocks, lag)?;
                Ok(Self { blocks, lag })
            }

            pub fn zeros(len: usize, dim: usize, lag: usize) -> Self {
                Self {
                    blocks: vec![DMatrix::zeros(dim, dim * lag); len],
                    lag,
                }
            }

            pub fn len(&self) -> usize {
                self.blocks.len()
            }

            pub fn is_empty(&self) -> bool {
                self.blocks.is_empty()
            }

            pub fn dim(&self) -> usize {
                self.blocks[0].nrows()
            }

            pub fn lag(&self) -> usize {
                self.lag
            }

            pub fn blocks(&self) -> &[DMatrix<f64>] {
                &self.blocks
            }

            pub fn blocks_mut(&mut self) -> &mut [DMatrix<f64>] {
                &mut self.blocks
            }

            pub fn into_blocks(self) -> Vec<DMatrix<f64>> {
                self.blocks
            }

            pub fn block_norms(&self) -> Vec<f64> {
                self.blocks.iter().map(|b| b.norm()).collect()
            }

            /// Frobenius norm of the whole stack.
            pub fn norm(&self) -> f64 {
                self.blocks
                    .iter()
                    .map(|b| b.norm_squared())
                    .sum::<f64>()
                    .sqrt()
            }

            pub fn same_shape(&self, other: &Self) -> bool {
                self.lag == other.lag
                    && self.blocks.len() == other.blocks.len()
                    && self.blocks[0].shape() == other.blocks[0].shape()
            }

            #[allow(dead_code)]
            pub(crate) fn check_same_shape(&self, other: &Self, what: &str) -> Result<()> {
                if self.same_shape(other) {
                    Ok(())
                } else {
                    Err(Error::dim(format!(
                        "{what}: {} blocks of {:?} vs {} blocks of {:?}",
                        self.len(),
                        self.blocks[0].shape(),
                        other.len(),
                        other.blocks[0].shape()
                    )))
                }
            }
        }
    };
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientPath {
    blocks: Vec<DMatrix<f64>>,
    lag: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffPath {
    blocks: Vec<DMatrix<f64>>,
    lag: usize,
}

path_common!(CoefficientPath);
path_common!(DiffPath);

impl CoefficientPath {
    /// The same coefficients at every one of `len` steps.
    pub fn constant(coeffs: DMatrix<f64>, len: usize, lag: usize) -> Result<Self> {
        Self::new(vec![coeffs; len], lag)
    }

    /// First differences: `theta_1 = A_1`, `theta_t = A_t - A_{t-1}`.
    pub fn to_diff(&self) -> DiffPath {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        blocks.push(self.blocks[0].clone());
        for w in self.blocks.windows(2) {
            blocks.push(&w[1] - &w[0]);
        }
        DiffPath {
            blocks,
            lag: self.lag,
        }
    }

    /// Squared one-step prediction residuals summed over time and coordinates.
    pub fn squared_residuals(&self, design: &LaggedDesign) -> Result<f64> {
        self.check_design(design)?;
        let x = design.regressors();
        let y = design.targets();
        let mut total = 0.0;
        for (t, a) in self.blocks.iter().enumerate() {
            let fitted = a * x.row(t).transpose();
            total += y
                .row(t)
                .iter()
                .zip(fitted.iter())
                .map(|(yv, fv)| (yv - fv).powi(2))
                .sum::<f64>();
        }
        Ok(total)
    }

    fn check_design(&self, design: &LaggedDesign) -> Result<()> {
        if self.len() != design.n_rows() || self.dim() != design.dim() || self.lag != design.lag() {
            return Err(Error::dim(format!(
                "path of {} steps (p={}, K={}) does not match design of {} rows (p={}, K={})",
                self.len(),
                self.dim(),
                self.lag,
                design.n_rows(),
                design.dim(),
                design.lag()
            )));
        }
        Ok(())
    }
}

impl DiffPath {
    /// Cumulative sums: `A_t = sum_{s <= t} theta_s`.
    pub fn to_coefficients(&self) -> CoefficientPath {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut acc = DMatrix::zeros(self.blocks[0].nrows(), self.blocks[0].ncols());
        for b in &self.blocks {
            acc += b;
            blocks.push(acc.clone());
        }
        CoefficientPath {
            blocks,
            lag: self.lag,
        }
    }

    /// Sum of Frobenius norms of the penalized blocks `t >= 2`.
    pub fn fusion_penalty(&self) -> f64 {
        self.blocks.iter().skip(1).map(|b| b.norm()).sum()
    }

    /// Difference-parameterized objective; equals [`objective`] on the
    /// cumulative path.
    pub fn objective(&self, design: &LaggedDesign, lambda: f64) -> Result<f64> {
        objective(&self.to_coefficients(), design, lambda)
    }

    /// Elementwise `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "add")?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "sub")?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            blocks: self.blocks.iter().map(|b| b * factor).collect(),
            lag: self.lag,
        }
    }

    /// Frobenius norm of `self - other` without allocating.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other, "distance")?;
        Ok(self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| {
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt())
    }

    fn zip_map(
        &self,
        other: &Self,
        f: impl Fn(&DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64>,
    ) -> Self {
        Self {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| f(a, b))
                .collect(),
            lag: self.lag,
        }
    }
}

/// Penalized least-squares objective
/// `sum_t ||x_t - A_t x~_t||^2 + lambda * sum_{t >= 2} ||A_t - A_{t-1}||_F`.
pub fn objective(path: &CoefficientPath, design: &LaggedDesign, lambda: f64) -> Result<f64> {
    let loss = path.squared_residuals(design)?;
    let penalty: f64 = path.blocks.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum();
    Ok(loss + lambda * penalty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::TimeSeries;
    use proptest::prelude::*;

    fn diff_strategy() -> impl Strategy<Value = DiffPath> {
        (1usize..4, 1usize..3, 1usize..7).prop_flat_map(|(p, k, t)| {
            prop::collection::vec(-5.0f64..5.0, p * p * k * t).prop_map(move |v| {
                let blocks = v
                    .chunks(p * p * k)
                    .map(|c| DMatrix::from_column_slice(p, p * k, c))
                    .collect();
                DiffPath::new(blocks, k).unwrap()
            })
        })
    }

    #[test]
    fn zero_differences_give_constant_path() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let d = DiffPath::new(
            vec![m.clone(), DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)],
            1,
        )
        .unwrap();
        let a = d.to_coefficients();
        assert!(a.blocks().iter().all(|b| *b == m));
    }

    #[test]
    fn cumulative_identity() {
        let i = DMatrix::<f64>::identity(2, 2);
        let a = DiffPath::new(vec![i.clone(), i.clone()], 1)
            .unwrap()
            .to_coefficients();
        assert_eq!(a.blocks()[0], i);
        assert_eq!(a.blocks()[1], &i * 2.0);
    }

    #[test]
    fn rejects_ragged_blocks() {
        let err = DiffPath::new(vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 4)], 1).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn zero_path_objective_is_total_energy() {
        let s = TimeSeries::from_rows(&[
            vec![1.0, -1.0],
            vec![2.0, 0.5],
            vec![-3.0, 1.0],
            vec![0.0, 2.0],
        ])
        .unwrap();
        let d = LaggedDesign::new(&s, 1).unwrap();
        let a = CoefficientPath::constant(DMatrix::zeros(2, 2), 3, 1).unwrap();
        let energy: f64 = d.targets().iter().map(|v| v * v).sum();
        for lambda in [0.0, 1.0, 100.0] {
            assert_eq!(objective(&a, &d, lambda).unwrap(), energy);
        }
    }

    #[test]
    fn interpolating_path_has_zero_loss_at_zero_lambda() {
        // Scalar series: A_t = x_t / x_{t-1} interpolates exactly.
        let s = TimeSeries::from_rows(&[vec![1.0], vec![2.0], vec![-1.0], vec![4.0]]).unwrap();
        let d = LaggedDesign::new(&s, 1).unwrap();
        let blocks = (0..3)
            .map(|i| DMatrix::from_element(1, 1, d.targets()[(i, 0)] / d.regressors()[(i, 0)]))
            .collect();
        let a = CoefficientPath::new(blocks, 1).unwrap();
        assert!(objective(&a, &d, 0.0).unwrap().abs() < 1e-12);
        assert!(objective(&a, &d, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn objective_shape_mismatch() {
        let s = TimeSeries::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let d = LaggedDesign::new(&s, 1).unwrap();
        let a = CoefficientPath::constant(DMatrix::zeros(1, 1), 5, 1).unwrap();
        assert!(matches!(objective(&a, &d, 1.0), Err(Error::Dimension(_))));
    }

    /// Straight-line evaluation of the same formula, written against raw
    /// series indices rather than the design.
    fn reference_objective(x: &[[f64; 2]], a: &[[[f64; 2]; 2]], lambda: f64) -> f64 {
        let mut loss = 0.0;
        for t in 1..x.len() {
            let at = &a[t - 1];
            for i in 0..2 {
                let pred = at[i][0] * x[t - 1][0] + at[i][1] * x[t - 1][1];
                loss += (x[t][i] - pred).powi(2);
            }
        }
        let mut pen = 0.0;
        for t in 1..a.len() {
            let mut sq = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    sq += (a[t][i][j] - a[t - 1][i][j]).powi(2);
                }
            }
            pen += sq.sqrt();
        }
        loss + lambda * pen
    }

    #[test]
    fn objective_matches_independent_evaluator() {
        // p = 2, K = 1, T = 5.
        let x = [
            [0.3, -1.2],
            [1.1, 0.4],
            [-0.7, 0.9],
            [0.2, -0.5],
            [1.5, 1.0],
            [-0.4, 0.6],
        ];
        let a = [
            [[0.5, 0.1], [-0.2, 0.3]],
            [[0.5, 0.1], [-0.2, 0.3]],
            [[0.1, -0.4], [0.6, 0.2]],
            [[0.0, 0.0], [0.8, -0.3]],
            [[0.9, 0.2], [0.8, -0.3]],
        ];
        let s = TimeSeries::from_rows(&x.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
        let d = LaggedDesign::new(&s, 1).unwrap();
        let path = CoefficientPath::new(
            a.iter()
                .map(|m| DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]))
                .collect(),
            1,
        )
        .unwrap();
        let lambda = 1.7;
        let got = objective(&path, &d, lambda).unwrap();
        let want = reference_objective(&x, &a, lambda);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        let via_diff = path.to_diff().objective(&d, lambda).unwrap();
        assert!((via_diff - want).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn diff_cumsum_round_trip(d in diff_strategy()) {
            let back = d.to_coefficients().to_diff();
            for (x, y) in back.blocks().iter().zip(d.blocks()) {
                for (u, v) in x.iter().zip(y.iter()) {
                    prop_assert!((u - v).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn objective_invariant_under_round_trip(d in diff_strategy(), lambda in 0.0f64..10.0) {
            let p = d.dim();
            let k = d.lag();
            let n = d.len() + k;
            let data = DMatrix::from_fn(n, p, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
            let design = LaggedDesign::new(&TimeSeries::new(data).unwrap(), k).unwrap();
            let a = d.to_coefficients();
            let f1 = objective(&a, &design, lambda).unwrap();
            let f2 = objective(&a.to_diff().to_coefficients(), &design, lambda).unwrap();
            prop_assert!((f1 - f2).abs() <= 1e-9 * (1.0 + f1.abs()));
        }
    }
}
