// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic piecewise-stationary VAR data.
//!
//! Randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64`; regime coefficients use stream 0 and observation noise
//! stream 1. Gaussian draws use `rand_distr::StandardNormal` (ziggurat).
//! Output is bit-identical for a given spec within one build.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

pub const DEFAULT_NOISE_SD: f64 = 0.1;
pub const DEFAULT_RADIUS_CAP: f64 = 0.9;
pub const DEFAULT_MIN_REGIME_DISTANCE: f64 = 0.5;
pub const DEFAULT_BURN_IN: usize = 200;

/// Rescaled regimes land at this fraction of the radius cap.
const RESCALE_MARGIN: f64 = 0.98;
const MAX_REGIME_ATTEMPTS: usize = 1000;
const NOISE_STREAM: u64 = 1;

/// `pK x pK` companion matrix of a `p x pK` stacked coefficient matrix.
pub fn companion_matrix(coeffs: &DMatrix<f64>) -> DMatrix<f64> {
    let p = coeffs.nrows();
    let d = coeffs.ncols();
    let mut c = DMatrix::zeros(d, d);
    c.view_mut((0, 0), (p, d)).copy_from(coeffs);
    for i in p..d {
        c[(i, i - p)] = 1.0;
    }
    c
}

/// Largest eigenvalue modulus of the companion matrix.
pub fn spectral_radius(coeffs: &DMatrix<f64>) -> f64 {
    companion_matrix(coeffs)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn draw_stable(rng: &mut ChaCha20Rng, p: usize, lag: usize, radius_cap: f64) -> DMatrix<f64> {
    let sd = 1.0 / ((p * lag) as f64).sqrt();
    let mut coeffs = DMatrix::from_fn(p, p * lag, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
    loop {
        let radius = spectral_radius(&coeffs);
        if radius < radius_cap {
            return coeffs;
        }
        // Scaling lag block k by c^k scales every companion eigenvalue by c.
        let c = RESCALE_MARGIN * radius_cap / radius;
        for k in 0..lag {
            let mut block = coeffs.view_mut((0, k * p), (p, p));
            block *= c.powi(k as i32 + 1);
        }
    }
}

/// Random `p x pK` VAR coefficients with spectral radius below `radius_cap`.
/// Deterministic in `seed`.
pub fn random_stable_var(p: usize, lag: usize, radius_cap: f64, seed: u64) -> Result<DMatrix<f64>> {
    check_cap(radius_cap)?;
    if p == 0 || lag == 0 {
        return Err(Error::InvalidSpec("dim and lag must be >= 1".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok(draw_stable(&mut rng, p, lag, radius_cap))
}

fn check_cap(radius_cap: f64) -> Result<()> {
    if !(radius_cap > 0.0 && radius_cap < 1.0) {
        return Err(Error::InvalidSpec(format!(
            "radius_cap must lie in (0, 1), got {radius_cap}"
        )));
    }
    Ok(())
}

/// `count` stable regimes in which consecutive regimes differ by at least
/// `min_distance` in Frobenius norm.
pub fn draw_regimes(
    p: usize,
    lag: usize,
    count: usize,
    radius_cap: f64,
    min_distance: f64,
    seed: u64,
) -> Result<Vec<DMatrix<f64>>> {
    check_cap(radius_cap)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out: Vec<DMatrix<f64>> = Vec::with_capacity(count);
    while out.len() < count {
        let mut attempts = 0;
        let next = loop {
            let cand = draw_stable(&mut rng, p, lag, radius_cap);
            match out.last() {
                Some(prev) if (&cand - prev).norm() < min_distance => {
                    attempts += 1;
                    if attempts >= MAX_REGIME_ATTEMPTS {
                        return Err(Error::InvalidSpec(format!(
                            "could not draw regime {} at distance >= {min_distance} from its predecessor",
                            out.len()
                        )));
                    }
                }
                _ => break cand,
            }
        };
        out.push(next);
    }
    Ok(out)
}

/// Fully specified piecewise VAR process.
///
/// Regime `i` governs times `t` in `(break_times[i-1], break_times[i]]`
/// (1-based), so a break at `b` means `x_{b+1}` is the first observation of
/// the new regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakVarSpec {
    pub dim: usize,
    pub lag: usize,
    pub n_times: usize,
    pub break_times: Vec<usize>,
    #[serde(with = "crate::serde_matrix::list")]
    pub segment_coeffs: Vec<DMatrix<f64>>,
    pub noise_sd: f64,
    pub seed: u64,
    pub burn_in: usize,
    /// Pre-sample lag vector `(x_0, x_{-1}, ..., x_{1-K})`; zeros if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
}

impl BreakVarSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.dim == 0 || self.lag == 0 {
            return bad("dim and lag must be >= 1".into());
        }
        if self.n_times == 0 {
            return bad("n_times must be >= 1".into());
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!(
                "noise_sd must be finite and >= 0, got {}",
                self.noise_sd
            ));
        }
        let mut prev = self.lag;
        for &b in &self.break_times {
            if b <= prev || b >= self.n_times {
                return bad(format!(
                    "break times must be strictly increasing inside ({}, {}), got {:?}",
                    self.lag, self.n_times, self.break_times
                ));
            }
            prev = b;
        }
        if self.segment_coeffs.len() != self.break_times.len() + 1 {
            return bad(format!(
                "{} breaks need {} regimes, got {}",
                self.break_times.len(),
                self.break_times.len() + 1,
                self.segment_coeffs.len()
            ));
        }
        for (i, a) in self.segment_coeffs.iter().enumerate() {
            if a.shape() != (self.dim, self.dim * self.lag) {
                return bad(format!("regime {i} has shape {:?}", a.shape()));
            }
            let r = spectral_radius(a);
            if !(r < 1.0) {
                return bad(format!(
                    "regime {i} is not stationary (spectral radius {r})"
                ));
            }
        }
        if let Some(init) = &self.initial_state {
            if init.len() != self.dim * self.lag {
                return bad(format!(
                    "initial_state has length {}, expected {}",
                    init.len(),
                    self.dim * self.lag
                ));
            }
        }
        Ok(())
    }

    /// Index of the regime governing 1-based time `t`.
    pub fn regime_at(&self, t: usize) -> usize {
        self.break_times.iter().filter(|&&b| b < t).count()
    }
}

/// Draws a series from `spec`. `burn_in` steps of regime 0 are generated and
/// discarded first.
pub fn simulate_break_var(spec: &BreakVarSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let p = spec.dim;
    let d = p * spec.lag;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    rng.set_stream(NOISE_STREAM);

    let mut history =
        nalgebra::DVector::from_vec(spec.initial_state.clone().unwrap_or_else(|| vec![0.0; d]));
    let mut step = |a: &DMatrix<f64>, history: &mut nalgebra::DVector<f64>| {
        let mut x = a * &*history;
        for v in x.iter_mut() {
            *v += spec.noise_sd * rng.sample::<f64, _>(StandardNormal);
        }
        // Shift lags right by one observation.
        for i in (p..d).rev() {
            history[i] = history[i - p];
        }
        history.rows_mut(0, p).copy_from(&x);
        x
    };

    for _ in 0..spec.burn_in {
        step(&spec.segment_coeffs[0], &mut history);
    }
    let mut data = DMatrix::zeros(spec.n_times, p);
    for t in 1..=spec.n_times {
        let x = step(&spec.segment_coeffs[spec.regime_at(t)], &mut history);
        data.row_mut(t - 1).copy_from(&x.transpose());
    }
    TimeSeries::new(data)
}

/// User-facing simulation settings; regimes are drawn when not given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSettings {
    pub dim: usize,
    pub lag: usize,
    pub n_times: usize,
    #[serde(default)]
    pub break_times: Vec<usize>,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_radius_cap")]
    pub radius_cap: f64,
    #[serde(default = "default_min_distance")]
    pub min_regime_distance: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default, with = "crate::serde_matrix::opt_list")]
    pub segment_coeffs: Option<Vec<DMatrix<f64>>>,
    #[serde(default)]
    pub initial_state: Option<Vec<f64>>,
}

fn default_noise_sd() -> f64 {
    DEFAULT_NOISE_SD
}
fn default_radius_cap() -> f64 {
    DEFAULT_RADIUS_CAP
}
fn default_min_distance() -> f64 {
    DEFAULT_MIN_REGIME_DISTANCE
}
fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl SimulationSettings {
    /// Settings with every default filled in.
    pub fn new(dim: usize, lag: usize, n_times: usize, break_times: Vec<usize>, seed: u64) -> Self {
        Self {
            dim,
            lag,
            n_times,
            break_times,
            noise_sd: DEFAULT_NOISE_SD,
            seed,
            radius_cap: DEFAULT_RADIUS_CAP,
            min_regime_distance: DEFAULT_MIN_REGIME_DISTANCE,
            burn_in: DEFAULT_BURN_IN,
            segment_coeffs: None,
            initial_state: None,
        }
    }

    /// Draws any missing regimes and validates the resulting spec.
    pub fn resolve(&self) -> Result<BreakVarSpec> {
        if self.dim == 0 || self.lag == 0 || self.n_times == 0 {
            return Err(Error::InvalidSpec(format!(
                "dim, lag and n_times must be >= 1 (got {}, {}, {})",
                self.dim, self.lag, self.n_times
            )));
        }
        let segment_coeffs = match &self.segment_coeffs {
            Some(c) => c.clone(),
            None => draw_regimes(
                self.dim,
                self.lag,
                self.break_times.len() + 1,
                self.radius_cap,
                self.min_regime_distance,
                self.seed,
            )?,
        };
        let spec = BreakVarSpec {
            dim: self.dim,
            lag: self.lag,
            n_times: self.n_times,
            break_times: self.break_times.clone(),
            segment_coeffs,
            noise_sd: self.noise_sd,
            seed: self.seed,
            burn_in: self.burn_in,
            initial_state: self.initial_state.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(a: DMatrix<f64>, n: usize, noise_sd: f64) -> BreakVarSpec {
        let p = a.nrows();
        let lag = a.ncols() / p;
        BreakVarSpec {
            dim: p,
            lag,
            n_times: n,
            break_times: vec![],
            segment_coeffs: vec![a],
            noise_sd,
            seed: 1,
            burn_in: DEFAULT_BURN_IN,
            initial_state: None,
        }
    }

    /// Dominant eigenvalue modulus by orthogonal subspace iteration on two
    /// vectors followed by the 2x2 Rayleigh-Ritz eigenvalues, which handles
    /// both a real dominant eigenvalue and a complex pair.
    fn power_iteration_radius(m: &DMatrix<f64>, iters: usize) -> f64 {
        let n = m.nrows();
        let mut q = DMatrix::from_fn(n, 2, |i, j| 1.0 + (i * 3 + j * 7) as f64 % 5.0);
        for _ in 0..iters {
            q = (m * &q).qr().q();
        }
        let h = q.transpose() * m * &q;
        let (a, b, c, d) = (h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
        let tr = a + d;
        let det = a * d - b * c;
        let disc = tr * tr / 4.0 - det;
        if disc >= 0.0 {
            let s = disc.sqrt();
            (tr / 2.0 + s).abs().max((tr / 2.0 - s).abs())
        } else {
            det.sqrt()
        }
    }

    #[test]
    fn radius_of_scaled_identity() {
        let a = DMatrix::<f64>::identity(3, 3) * 0.5;
        assert!((spectral_radius(&a) - 0.5).abs() < 1e-14);
        assert!(spectral_radius(&DMatrix::zeros(2, 4)) < 1e-12);
    }

    #[test]
    fn radius_matches_subspace_iteration() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let a = DMatrix::from_fn(3, 6, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.4);
        let want = power_iteration_radius(&companion_matrix(&a), 5000);
        let got = spectral_radius(&a);
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn stable_draws_respect_cap_and_seed() {
        for seed in 0..20 {
            for (p, k) in [(1, 1), (3, 2), (10, 1), (4, 3)] {
                let a = random_stable_var(p, k, 0.9, seed).unwrap();
                assert!(spectral_radius(&a) < 0.9);
                assert_eq!(a, random_stable_var(p, k, 0.9, seed).unwrap());
            }
        }
        assert!(random_stable_var(2, 1, 1.0, 0).is_err());
    }

    #[test]
    fn regimes_are_separated() {
        let regs = draw_regimes(10, 1, 3, 0.9, 0.5, 7).unwrap();
        assert_eq!(regs.len(), 3);
        for w in regs.windows(2) {
            assert!((&w[1] - &w[0]).norm() >= 0.5);
        }
    }

    #[test]
    fn zero_dynamics_without_noise_is_zero() {
        let s = simulate_break_var(&single(DMatrix::zeros(2, 2), 10, 0.0)).unwrap();
        assert!(s.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_geometric_decay() {
        let mut spec = single(DMatrix::from_element(1, 1, 0.5), 12, 0.0);
        spec.burn_in = 0;
        spec.initial_state = Some(vec![1.0]);
        let s = simulate_break_var(&spec).unwrap();
        for t in 1..=12 {
            assert_eq!(s.data()[(t - 1, 0)], 0.5f64.powi(t as i32));
        }
    }

    #[test]
    fn same_seed_same_series() {
        let spec = SimulationSettings::new(3, 2, 80, vec![40], 9)
            .resolve()
            .unwrap();
        let a = simulate_break_var(&spec).unwrap();
        let b = simulate_break_var(&spec).unwrap();
        assert_eq!(a, b);
        let mut other = spec.clone();
        other.seed = 10;
        assert_ne!(a, simulate_break_var(&other).unwrap());
    }

    #[test]
    fn regime_boundaries_follow_half_open_intervals() {
        let spec = SimulationSettings::new(1, 1, 300, vec![100, 200], 0)
            .resolve()
            .unwrap();
        assert_eq!(spec.regime_at(100), 0);
        assert_eq!(spec.regime_at(101), 1);
        assert_eq!(spec.regime_at(200), 1);
        assert_eq!(spec.regime_at(201), 2);
    }

    #[test]
    fn reference_dimensions() {
        let spec = SimulationSettings::new(10, 1, 300, vec![100, 200], 3)
            .resolve()
            .unwrap();
        assert_eq!(spec.segment_coeffs.len(), 3);
        let s = simulate_break_var(&spec).unwrap();
        assert_eq!((s.n_times(), s.dim()), (300, 10));
    }

    #[test]
    fn validation_errors() {
        let base = SimulationSettings::new(2, 1, 50, vec![20], 0);
        let mut s = base.clone();
        s.n_times = 0;
        assert!(matches!(s.resolve(), Err(Error::InvalidSpec(_))));
        let mut s = base.clone();
        s.break_times = vec![1];
        assert!(s.resolve().is_err());
        let mut s = base.clone();
        s.break_times = vec![30, 30];
        assert!(s.resolve().is_err());
        let mut s = base.clone();
        s.segment_coeffs = Some(vec![DMatrix::identity(2, 2), DMatrix::zeros(2, 2)]);
        assert!(s
            .resolve()
            .unwrap_err()
            .to_string()
            .contains("not stationary"));
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = SimulationSettings::new(2, 2, 30, vec![10], 4)
            .resolve()
            .unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: BreakVarSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
