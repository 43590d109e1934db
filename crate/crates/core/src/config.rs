//! Run configuration: flat `key = value` lines with dotted section
//! prefixes. `#` starts a comment; lists are comma separated.
//!
//! ```text
//! run.seed = 7
//! model.mu = 0.5
//! model.n_t = 4
//! suites.select = car, lp
//! tolerance.lp.unit_norm = 1e-11
//! phi4.theta = 0.1, 0.25
//! out.dir = results
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelParams {
    pub mu: f64,
    /// One-particle dimension of the scalar model used by `norms`.
    pub d: usize,
    pub n_t: usize,
    /// Horizon `T`.
    pub horizon: f64,
    pub h_dim: usize,
    pub n_reserved: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { mu: 0.5, d: 2, n_t: 4, horizon: 1.0, h_dim: 2, n_reserved: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Phi4Params {
    pub thetas: Vec<f64>,
    pub taus: Vec<f64>,
    pub cutoffs: Vec<f64>,
}

impl Default for Phi4Params {
    fn default() -> Self {
        Self { thetas: vec![0.1, 0.25], taus: vec![0.0], cutoffs: vec![8.0, 16.0, 32.0, 64.0, 128.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelParams,
    /// Overrides keyed by `suite.check`.
    pub tolerances: BTreeMap<String, f64>,
    pub suites: Vec<String>,
    pub phi4: Phi4Params,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: ModelParams::default(),
            tolerances: BTreeMap::new(),
            suites: crate::suites::names().into_iter().map(String::from).collect(),
            phi4: Phi4Params::default(),
            out: None,
        }
    }
}

fn bad<T>(line: usize, msg: impl std::fmt::Display) -> Result<T> {
    Err(Error::Config(format!("line {line}: {msg}")))
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().or_else(|_| bad(line, format!("cannot parse `{v}` for {key}")))
}

fn list<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| num(line, key, s)).collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return bad(line, "expected `key = value`");
            };
            let (key, v) = (key.trim(), value.trim());
            match key {
                "run.seed" => cfg.seed = num(line, key, v)?,
                "model.mu" => cfg.model.mu = num(line, key, v)?,
                "model.d" => cfg.model.d = num(line, key, v)?,
                "model.n_t" => cfg.model.n_t = num(line, key, v)?,
                "model.T" => cfg.model.horizon = num(line, key, v)?,
                "model.h_dim" => cfg.model.h_dim = num(line, key, v)?,
                "model.n_reserved" => cfg.model.n_reserved = num(line, key, v)?,
                "suites.select" => cfg.suites = list(line, key, v)?,
                "phi4.theta" => cfg.phi4.thetas = list(line, key, v)?,
                "phi4.tau" => cfg.phi4.taus = list(line, key, v)?,
                "phi4.cutoffs" => cfg.phi4.cutoffs = list(line, key, v)?,
                "out.dir" => cfg.out = Some(PathBuf::from(v)),
                _ => match key.strip_prefix("tolerance.") {
                    Some(name) if name.contains('.') => {
                        cfg.tolerances.insert(name.to_string(), num(line, key, v)?);
                    }
                    _ => return bad(line, format!("unknown key `{key}`")),
                },
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        for (k, t) in &self.tolerances {
            if !(*t >= 0.0) {
                return fail(format!("tolerance {k} = {t} must be nonnegative"));
            }
        }
        for s in &self.suites {
            if crate::suites::find(s).is_none() {
                return fail(format!("unknown suite `{s}`"));
            }
        }
        let m = &self.model;
        if !(m.mu > 0.0 && m.mu < 1.0) {
            return fail(format!("model.mu = {} outside (0, 1)", m.mu));
        }
        if m.d == 0 || m.n_t == 0 || !(m.horizon > 0.0) || m.h_dim == 0 || m.h_dim % 2 != 0 {
            return fail("model sizes must be positive and h_dim even".into());
        }
        if self.phi4.thetas.is_empty() || self.phi4.taus.is_empty() || self.phi4.cutoffs.len() < 2 {
            return fail("phi4 scans need a theta, a tau and at least two cutoffs".into());
        }
        Ok(())
    }
}
