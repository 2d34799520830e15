// SPDX-License-Identifier: MIT OR Apache-2.0

//! Fit configuration: optional JSON file, then command-line overrides.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tsbreak_core::SolverConfig;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Lambdas {
    One(f64),
    Many(Vec<f64>),
}

impl Lambdas {
    fn into_vec(self) -> Vec<f64> {
        match self {
            Lambdas::One(l) => vec![l],
            Lambdas::Many(v) => v,
        }
    }
}

/// Keys accepted in a `--config` file. All optional.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub lambda: Option<Lambdas>,
    pub rho: Option<f64>,
    pub lag: Option<usize>,
    pub eps_abs: Option<f64>,
    pub eps_rel: Option<f64>,
    pub max_iter: Option<usize>,
    pub detect_threshold: Option<f64>,
    pub seed: Option<u64>,
    pub adaptive_rho: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        parse_json(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(self, other: ConfigFile) -> ConfigFile {
        ConfigFile {
            lambda: other.lambda.or(self.lambda),
            rho: other.rho.or(self.rho),
            lag: other.lag.or(self.lag),
            eps_abs: other.eps_abs.or(self.eps_abs),
            eps_rel: other.eps_rel.or(self.eps_rel),
            max_iter: other.max_iter.or(self.max_iter),
            detect_threshold: other.detect_threshold.or(self.detect_threshold),
            seed: other.seed.or(self.seed),
            adaptive_rho: other.adaptive_rho.or(self.adaptive_rho),
        }
    }

    pub fn resolve(self) -> Result<FitConfig> {
        let Some(lambdas) = self.lambda.map(Lambdas::into_vec) else {
            bail!("no lambda given; pass --lambda or set \"lambda\" in the config file");
        };
        if lambdas.is_empty() {
            bail!("lambda list is empty");
        }
        let d = SolverConfig::default();
        let fit = FitConfig {
            lambdas,
            rho: self.rho.unwrap_or(d.rho),
            lag: self.lag.unwrap_or(d.lag),
            eps_abs: self.eps_abs.unwrap_or(d.eps_abs),
            eps_rel: self.eps_rel.unwrap_or(d.eps_rel),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            detect_threshold: self.detect_threshold.unwrap_or(d.detect_threshold),
            seed: self.seed,
            adaptive_rho: self.adaptive_rho.unwrap_or(d.adaptive_rho),
        };
        for l in &fit.lambdas {
            fit.solver(*l).validate()?;
        }
        Ok(fit)
    }
}

/// Fully resolved settings, embedded verbatim in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub lambdas: Vec<f64>,
    pub rho: f64,
    pub lag: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub detect_threshold: f64,
    pub seed: Option<u64>,
    pub adaptive_rho: bool,
}

impl FitConfig {
    pub fn solver(&self, lambda: f64) -> SolverConfig {
        SolverConfig {
            lambda,
            rho: self.rho,
            lag: self.lag,
            eps_abs: self.eps_abs,
            eps_rel: self.eps_rel,
            max_iter: self.max_iter,
            detect_threshold: self.detect_threshold,
            seed: self.seed,
            adaptive_rho: self.adaptive_rho,
        }
    }
}

/// Deserializes JSON, reporting the path of the offending field.
pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow::anyhow!("at `{path}`: {}", e.into_inner())
    })
}

/// Comma-separated penalty list from the command line.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaList(pub Vec<f64>);

pub fn parse_lambda_list(s: &str) -> Result<LambdaList, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad lambda {t:?}"))
        })
        .collect::<Result<_, _>>()
        .map(LambdaList)
}
