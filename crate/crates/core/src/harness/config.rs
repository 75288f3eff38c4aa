use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::abs::{AbsConfig, InitMode};
use crate::quantization::{toml_line, total_budget, MAX_CODEBOOK_BITS};
use crate::{Error, Result};

/// Encoding scheme compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Abs,
    NearestNeighbor,
    SupportSet,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Abs, Method::NearestNeighbor, Method::SupportSet];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Abs => "abs",
            Method::NearestNeighbor => "nearest-neighbor",
            Method::SupportSet => "support-set",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

/// Sweep definition. Loaded from flat `key = value` TOML; every key is
/// optional and falls back to the desk-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Signal dimension M.
    pub m: usize,
    /// Sparsity K.
    pub k: usize,
    /// Rate in bits per signal component used by the α sweep.
    pub r_x: f64,
    /// Measurement rates N/M swept at fixed `r_x`.
    pub alphas: Vec<f64>,
    /// Rates swept at fixed `rate_alpha`.
    pub rates: Vec<f64>,
    pub rate_alpha: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub gamma: f64,
    pub max_outer_iters: usize,
    pub methods: Vec<Method>,
    pub init_mode: InitMode,
    /// Samples drawn to train each codebook.
    pub training_samples: usize,
    pub lloyd_tol: f64,
    pub lloyd_max_iter: usize,
    /// Widest codebook the harness trains; budget beyond it is left unspent.
    pub max_bits: u32,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            m: 128,
            k: 9,
            r_x: 0.75,
            alphas: vec![0.1, 0.25, 0.5, 0.75],
            rates: Vec::new(),
            rate_alpha: 0.25,
            trials: 100,
            master_seed: 1,
            gamma: 1e-6,
            max_outer_iters: 20,
            methods: Method::ALL.to_vec(),
            init_mode: InitMode::NearestNeighbor,
            training_samples: 1_000_000,
            lloyd_tol: 1e-7,
            lloyd_max_iter: 500,
            max_bits: 12,
            threads: None,
        }
    }
}

/// One (α, r_x) operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub alpha: f64,
    pub r_x: f64,
    /// Measurements N = round(α·M), half up.
    pub n: usize,
    /// R_x = M·r_x.
    pub total_bits: u64,
}

/// N = round(α·M) with halves rounded up.
pub fn measurements_for(alpha: f64, m: usize) -> usize {
    // the epsilon absorbs representation error in products like 0.35·100
    (alpha * m as f64 + 0.5 + 1e-9).floor() as usize
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            Error::InvalidConfig(format!(
                "line {}: {}",
                toml_line(text, e.span()),
                e.message()
            ))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn abs_config(&self) -> AbsConfig {
        AbsConfig {
            gamma: self.gamma,
            max_outer_iters: self.max_outer_iters,
            init_mode: self.init_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k == 0 || self.k >= self.m {
            return bad(format!("need 0 < k < m, got k = {}, m = {}", self.k, self.m));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return bad("duplicate method".into());
        }
        if self.methods.contains(&Method::SupportSet) && !self.m.is_power_of_two() {
            return bad(format!("support-set coding needs m to be a power of two, got {}", self.m));
        }
        if self.alphas.is_empty() && self.rates.is_empty() {
            return bad("nothing to sweep: alphas and rates are both empty".into());
        }
        self.abs_config().validate()?;
        if self.max_bits == 0 || self.max_bits > MAX_CODEBOOK_BITS {
            return bad(format!("max_bits must be in 1..={MAX_CODEBOOK_BITS}"));
        }
        if self.training_samples < 1usize << self.max_bits {
            return bad(format!(
                "training_samples = {} is fewer than the {} levels of a {}-bit codebook",
                self.training_samples,
                1usize << self.max_bits,
                self.max_bits
            ));
        }
        if self.lloyd_tol.is_nan() || self.lloyd_tol <= 0.0 {
            return bad("lloyd_tol must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        for p in self.points_unchecked() {
            if !(p.alpha > 0.0 && p.alpha <= 1.0) {
                return bad(format!("alpha = {} is outside (0, 1]", p.alpha));
            }
            if p.n == 0 || p.n >= self.m {
                return bad(format!(
                    "alpha = {} gives N = {} measurements; need 0 < N < M = {}",
                    p.alpha, p.n, self.m
                ));
            }
            total_budget(self.m, p.r_x).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }

    fn points_unchecked(&self) -> Vec<Point> {
        let mut points: Vec<Point> = Vec::new();
        let pairs = self
            .alphas
            .iter()
            .map(|&a| (a, self.r_x))
            .chain(self.rates.iter().map(|&r| (self.rate_alpha, r)));
        for (alpha, r_x) in pairs {
            if points.iter().any(|p| p.alpha == alpha && p.r_x == r_x) {
                continue;
            }
            points.push(Point {
                alpha,
                r_x,
                n: measurements_for(alpha, self.m),
                total_bits: total_budget(self.m, r_x).unwrap_or(0),
            });
        }
        points
    }

    /// Operating points: the α sweep first, then the rate sweep, without
    /// duplicates.
    pub fn points(&self) -> Result<Vec<Point>> {
        self.validate()?;
        Ok(self.points_unchecked())
    }
}
