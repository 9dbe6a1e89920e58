//! Flat key-value run configuration: one `key = value` pair per line,
//! `#` comments, environment overrides via `ANNULI_<KEY>`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nehari::{DescentKind, InitSide};
use crate::params::ProblemParams;

pub const ENV_PREFIX: &str = "ANNULI_";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub m: u32,
    pub a: f64,
    pub b: f64,
    pub p: f64,
    /// λ values, strictly increasing; single-element for plain solves.
    pub lambdas: Vec<f64>,
    pub n_rho: usize,
    pub n_phi: usize,
    pub tol: f64,
    pub max_iters: usize,
    /// Φᵏ range 1..=k_max.
    pub k_max: u32,
    pub seed: u64,
    /// Worker threads for sweeps; 0 = library default.
    pub workers: usize,
    pub out_dir: String,
    pub mc_samples: usize,
    pub init_side: String,
    pub descent: String,
    pub newton: bool,
    pub multistart: usize,
    /// Exclusion-ball radius around the limit peak, as a fraction of R2−R1.
    pub ball_radius_frac: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            m: 2,
            a: 1.0,
            b: 2.0,
            p: 3.0,
            lambdas: vec![100.0],
            n_rho: 256,
            n_phi: 128,
            tol: 1e-8,
            max_iters: 50_000,
            k_max: 12,
            seed: 0,
            workers: 0,
            out_dir: "out".into(),
            mc_samples: 4_000_000,
            init_side: "inner".into(),
            descent: "precond".into(),
            newton: true,
            multistart: 0,
            ball_radius_frac: 0.2,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = RunConfig::parse(&text)?;
        cfg.apply_env()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut saw_lambda = false;
        let mut saw_eps = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected 'key = value', got '{raw}'",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if key == "lambda" {
                saw_lambda = true;
            }
            if key == "eps" {
                saw_eps = true;
            }
            cfg.set(key, value)?;
        }
        if saw_lambda && saw_eps {
            return Err(Error::Config(
                "config sets both 'lambda' and 'eps'; choose one parameterization".into(),
            ));
        }
        Ok(cfg)
    }

    /// Applies `ANNULI_<KEY>` environment overrides.
    pub fn apply_env(&mut self) -> Result<()> {
        for (k, v) in std::env::vars() {
            if let Some(stripped) = k.strip_prefix(ENV_PREFIX) {
                let key = stripped.to_ascii_lowercase();
                self.set(&key, &v)?;
            }
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("invalid {what} value '{value}' for key '{key}'"));
        match key {
            "m" => self.m = value.parse().map_err(|_| bad("integer"))?,
            "a" => self.a = value.parse().map_err(|_| bad("float"))?,
            "b" => self.b = value.parse().map_err(|_| bad("float"))?,
            "p" => self.p = value.parse().map_err(|_| bad("float"))?,
            "lambda" => {
                self.lambdas = parse_float_list(value).ok_or_else(|| bad("float list"))?;
            }
            "eps" => {
                let eps = parse_float_list(value).ok_or_else(|| bad("float list"))?;
                if eps.iter().any(|&e| !(e > 0.0)) {
                    return Err(Error::Config("eps values must be positive".into()));
                }
                // λ = 1/ε²; ε decreasing ⇒ λ increasing
                let mut lambdas: Vec<f64> = eps.iter().map(|&e| 1.0 / (e * e)).collect();
                lambdas.sort_by(|x, y| x.partial_cmp(y).unwrap());
                self.lambdas = lambdas;
            }
            "n_rho" => self.n_rho = value.parse().map_err(|_| bad("integer"))?,
            "n_phi" => self.n_phi = value.parse().map_err(|_| bad("integer"))?,
            "tol" => self.tol = value.parse().map_err(|_| bad("float"))?,
            "max_iters" => self.max_iters = value.parse().map_err(|_| bad("integer"))?,
            "k_max" => self.k_max = value.parse().map_err(|_| bad("integer"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("integer"))?,
            "workers" => self.workers = value.parse().map_err(|_| bad("integer"))?,
            "out_dir" => self.out_dir = value.to_string(),
            "mc_samples" => self.mc_samples = value.parse().map_err(|_| bad("integer"))?,
            "init_side" => match value {
                "inner" | "outer" => self.init_side = value.into(),
                _ => return Err(bad("init_side (inner|outer)")),
            },
            "descent" => match value {
                "precond" | "plain" => self.descent = value.into(),
                _ => return Err(bad("descent (precond|plain)")),
            },
            "newton" => match value {
                "true" | "1" | "yes" => self.newton = true,
                "false" | "0" | "no" => self.newton = false,
                _ => return Err(bad("bool")),
            },
            "multistart" => self.multistart = value.parse().map_err(|_| bad("integer"))?,
            "ball_radius_frac" => {
                self.ball_radius_frac = value.parse().map_err(|_| bad("float"))?
            }
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() {
            return Err(Error::Config("at least one λ is required".into()));
        }
        for w in self.lambdas.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Config(format!(
                    "λ list must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if self.k_max == 0 {
            return Err(Error::Config("k_max must be ≥ 1".into()));
        }
        if !(self.ball_radius_frac > 0.0 && self.ball_radius_frac < 1.0) {
            return Err(Error::Config("ball_radius_frac must lie in (0, 1)".into()));
        }
        // params for the first λ validate the shared geometry
        self.params_for(self.lambdas[0])?;
        Ok(())
    }

    pub fn params_for(&self, lambda: f64) -> Result<ProblemParams> {
        ProblemParams::new(self.m, self.a, self.b, self.p, lambda)
    }

    pub fn init_side_kind(&self) -> InitSide {
        match self.init_side.as_str() {
            "outer" => InitSide::Outer,
            _ => InitSide::Inner,
        }
    }

    pub fn descent_kind(&self) -> DescentKind {
        match self.descent.as_str() {
            "plain" => DescentKind::PlainL2,
            _ => DescentKind::Preconditioned,
        }
    }

    /// Canonical textual form; used to match persisted sweep rows on resume
    /// and embedded in artifacts.
    pub fn canonical_string(&self) -> String {
        let mut map = BTreeMap::new();
        map.insert("m", self.m.to_string());
        map.insert("a", self.a.to_string());
        map.insert("b", self.b.to_string());
        map.insert("p", self.p.to_string());
        map.insert(
            "lambda",
            self.lambdas
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        map.insert("n_rho", self.n_rho.to_string());
        map.insert("n_phi", self.n_phi.to_string());
        map.insert("tol", self.tol.to_string());
        map.insert("max_iters", self.max_iters.to_string());
        map.insert("k_max", self.k_max.to_string());
        map.insert("seed", self.seed.to_string());
        map.insert("mc_samples", self.mc_samples.to_string());
        map.insert("init_side", self.init_side.clone());
        map.insert("descent", self.descent.clone());
        map.insert("newton", self.newton.to_string());
        map.insert("multistart", self.multistart.to_string());
        map.insert("ball_radius_frac", self.ball_radius_frac.to_string());
        map.iter()
            .map(|(k, v)| format!("{k} = {v}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn parse_float_list(value: &str) -> Option<Vec<f64>> {
    let vals: Option<Vec<f64>> = value
        .split(',')
        .map(|t| t.trim().parse::<f64>().ok())
        .collect();
    vals.filter(|v| !v.is_empty())
}
