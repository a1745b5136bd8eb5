//! Flat `key = value` experiment configuration.
//!
//! Sources are layered: built-in defaults, then a config file, then
//! environment variables `CIM_<KEY>` (upper case), then command-line flags.

use std::path::{Path, PathBuf};

use crate::error::{CimError, Result};
use crate::manifold::{GraphSettings, GridSpec, WindowTimes};
use crate::robustness::PipelineSettings;
use crate::spectral::SpectralField;

pub const ENV_PREFIX: &str = "CIM_";

#[derive(Debug, Clone, PartialEq)]
pub enum Flow {
    Parabolic,
    Hyperbolic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub delta: f64,
    pub eps: f64,
    pub eps_list: Vec<f64>,
    pub modes: usize,
    pub dt: f64,
    pub flow: Flow,
    pub t_end: f64,
    pub n_max: usize,
    pub u0: Option<Vec<f64>>,
    pub ut0: Option<Vec<f64>>,
    pub amplitude: f64,
    pub forcing: Vec<f64>,
    pub slack: f64,
    pub simulate_cutoff: bool,
    pub manifold_cutoff: bool,
    pub n_star: Option<usize>,
    pub grid_points: usize,
    pub grid_half_width: f64,
    pub grid_cap: usize,
    pub t_relax: f64,
    pub graph_tol: f64,
    pub graph_max_iter: usize,
    pub t_horizon: f64,
    pub t_grid_size: usize,
    pub rho3: f64,
    pub i3_count: usize,
    pub singular_limit: bool,
    pub singular_samples: usize,
    pub synthetic_distances: Option<Vec<f64>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let g = GraphSettings::default();
        let grid = GridSpec::default();
        let w = WindowTimes::default();
        Self {
            seed: 0,
            out: PathBuf::from("cim-out"),
            delta: 1.5,
            eps: 1e-2,
            eps_list: vec![1e-2, 3e-3, 1e-3, 3e-4],
            modes: 32,
            dt: 1e-3,
            flow: Flow::Parabolic,
            t_end: 5.0,
            n_max: crate::gap::DEFAULT_N_MAX,
            u0: None,
            ut0: None,
            amplitude: 0.5,
            forcing: Vec::new(),
            slack: 1e-6,
            simulate_cutoff: false,
            manifold_cutoff: true,
            n_star: None,
            grid_points: grid.points_per_axis,
            grid_half_width: grid.half_width,
            grid_cap: grid.cap,
            t_relax: g.t_relax,
            graph_tol: g.tol,
            graph_max_iter: g.max_iter,
            t_horizon: w.t_horizon,
            t_grid_size: w.t_grid_size,
            rho3: 10.0,
            i3_count: 4,
            singular_limit: true,
            singular_samples: 101,
            synthetic_distances: None,
        }
    }
}

fn bad(key: &str, value: &str) -> CimError {
    CimError::Config(format!("cannot parse {key} = {value:?}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| bad(key, value))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>> {
    let v = value.trim();
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| num(key, x)).collect()
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

fn optional<T>(value: &str, parse: impl FnOnce(&str) -> Result<T>) -> Result<Option<T>> {
    match value.trim() {
        "" | "auto" | "none" => Ok(None),
        v => parse(v).map(Some),
    }
}

impl ExperimentConfig {
    /// Sets one key. Keys use `snake_case`; `-` is accepted for `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        let k = key.as_str();
        match k {
            "seed" => self.seed = num(k, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            "delta" => self.delta = num(k, value)?,
            "eps" => self.eps = num(k, value)?,
            "eps_list" => self.eps_list = list(k, value)?,
            "modes" => self.modes = num(k, value)?,
            "dt" => self.dt = num(k, value)?,
            "flow" => {
                self.flow = match value.trim() {
                    "parabolic" => Flow::Parabolic,
                    "hyperbolic" => Flow::Hyperbolic,
                    _ => return Err(bad(k, value)),
                }
            }
            "t_end" => self.t_end = num(k, value)?,
            "n_max" => self.n_max = num(k, value)?,
            "u0" => self.u0 = optional(value, |v| list(k, v))?,
            "ut0" => self.ut0 = optional(value, |v| list(k, v))?,
            "amplitude" => self.amplitude = num(k, value)?,
            "forcing" => self.forcing = list(k, value)?,
            "slack" => self.slack = num(k, value)?,
            "simulate_cutoff" => self.simulate_cutoff = flag(k, value)?,
            "manifold_cutoff" => self.manifold_cutoff = flag(k, value)?,
            "n_star" => self.n_star = optional(value, |v| num(k, v))?,
            "grid_points" => self.grid_points = num(k, value)?,
            "grid_half_width" => self.grid_half_width = num(k, value)?,
            "grid_cap" => self.grid_cap = num(k, value)?,
            "t_relax" => self.t_relax = num(k, value)?,
            "graph_tol" => self.graph_tol = num(k, value)?,
            "graph_max_iter" => self.graph_max_iter = num(k, value)?,
            "t_horizon" => self.t_horizon = num(k, value)?,
            "t_grid_size" => self.t_grid_size = num(k, value)?,
            "rho3" => self.rho3 = num(k, value)?,
            "i3_count" => self.i3_count = num(k, value)?,
            "singular_limit" => self.singular_limit = flag(k, value)?,
            "singular_samples" => self.singular_samples = num(k, value)?,
            "synthetic_distances" => self.synthetic_distances = optional(value, |v| list(k, v))?,
            _ => return Err(CimError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CimError::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CimError::Config(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Applies every `CIM_<KEY>` variable of `vars`.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
        let mut vars: Vec<_> = vars
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_ascii_lowercase(), v)))
            .collect();
        vars.sort();
        for (k, v) in vars {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Defaults, then `file`, then `env`, then `overrides` in order.
    pub fn layered(
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(p) = file {
            cfg.apply_file(p)?;
        }
        cfg.apply_env(env)?;
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(CimError::Config(m));
        if !(self.delta > 1.0) {
            return fail(format!("delta = {} must exceed 1", self.delta));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return fail(format!("eps = {} outside (0, 1]", self.eps));
        }
        if self.modes == 0 {
            return fail("modes must be positive".into());
        }
        if !(self.dt > 0.0) {
            return fail(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_end >= 0.0) {
            return fail(format!("t_end = {} must be ≥ 0", self.t_end));
        }
        if self.forcing.len() > self.modes {
            return fail(format!("forcing has {} coefficients for {} modes", self.forcing.len(), self.modes));
        }
        for (name, v) in [("u0", &self.u0), ("ut0", &self.ut0)] {
            if v.as_ref().is_some_and(|v| v.len() > self.modes) {
                return fail(format!("{name} has more coefficients than modes"));
            }
        }
        Ok(())
    }

    /// Forcing padded to `modes`.
    pub fn forcing_field(&self) -> Result<SpectralField> {
        pad(&self.forcing, self.modes)
    }

    pub fn pipeline(&self) -> Result<PipelineSettings> {
        Ok(PipelineSettings {
            delta: self.delta,
            n_modes: self.modes,
            dt: self.dt,
            n_star_override: self.n_star,
            grid: GridSpec {
                half_width: self.grid_half_width,
                points_per_axis: self.grid_points,
                cap: self.grid_cap,
            },
            graph: GraphSettings {
                t_relax: self.t_relax,
                tol: self.graph_tol,
                max_iter: self.graph_max_iter,
            },
            windows: WindowTimes {
                t_horizon: self.t_horizon,
                t_grid_size: self.t_grid_size,
                ..WindowTimes::default()
            },
            rho3: self.rho3,
            i3_count: self.i3_count,
            seed: self.seed,
            modified: self.manifold_cutoff,
            forcing: Some(self.forcing_field()?),
        })
    }
}

pub(crate) fn pad(c: &[f64], n: usize) -> Result<SpectralField> {
    let mut v = c.to_vec();
    v.resize(n, 0.0);
    SpectralField::new(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layering_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# comment\ndelta = 2.0\nmodes = 8\ndt=0.01 # inline\n").unwrap();
        let env = vec![
            ("CIM_MODES".to_string(), "12".to_string()),
            ("OTHER".to_string(), "x".to_string()),
        ];
        let cfg = ExperimentConfig::layered(Some(&path), env, &[("dt".into(), "0.02".into())]).unwrap();
        assert_eq!(cfg.delta, 2.0);
        assert_eq!(cfg.modes, 12);
        assert_eq!(cfg.dt, 0.02);
    }

    #[test]
    fn parse_errors() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.set("nope", "1").is_err());
        assert!(cfg.set("delta", "abc").is_err());
        assert!(cfg.apply_text("delta 2").is_err());
        cfg.set("eps-list", "1e-2, 1e-3,1e-4").unwrap();
        assert_eq!(cfg.eps_list, vec![1e-2, 1e-3, 1e-4]);
        cfg.set("n_star", "auto").unwrap();
        assert_eq!(cfg.n_star, None);
        cfg.set("n_star", "4").unwrap();
        assert_eq!(cfg.n_star, Some(4));
        cfg.set("delta", "0.9").unwrap();
        assert!(cfg.validate().is_err());
    }
}
