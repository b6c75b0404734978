//! Experiment configuration, read from JSON or TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkpoint::CheckpointFormat;
use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::linear::InitialPerturbation;
use crate::profile::{ProfileSpec, ShearProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n1: usize,
    /// `n2 = n2_per_m * m`, keeping the `x2` spacing fixed across `m`.
    pub n2_per_m: usize,
}

/// Which Jacobi-field route a sweep runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Linearized Euler plus Jacobi integration along the shear.
    #[default]
    Linearized,
    /// Central differences of two particle-carrying nonlinear runs.
    Fd,
    /// Both, with a cross-route comparison.
    Both,
}

impl Route {
    pub fn linearized(self) -> bool {
        matches!(self, Route::Linearized | Route::Both)
    }

    pub fn fd(self) -> bool {
        matches!(self, Route::Fd | Route::Both)
    }
}

fn default_epsilon() -> f64 {
    0.1
}
fn default_sample_dt() -> f64 {
    0.05
}
fn default_cfl() -> f64 {
    0.5
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}
fn default_tau_d() -> f64 {
    0.02
}
fn default_label_stride() -> [usize; 2] {
    [2, 2]
}
fn default_slope_window() -> f64 {
    0.1
}
fn default_dt_safety() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub profile: ProfileSpec,
    pub m_list: Vec<usize>,
    /// Perturbation sizes, positive and strictly decreasing.
    pub sigma_list: Vec<f64>,
    #[serde(default)]
    pub u_in: InitialPerturbation,
    /// Exponent slack in the indicator weight `<t>^(1+epsilon)`.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Final time `T`.
    pub horizon: f64,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub route: Route,
    /// Relative slack of the constant-1 inequalities.
    #[serde(default = "default_tau_d")]
    pub tau_d: f64,
    /// Labels sit on every `label_stride`-th grid point along `x1`, `x2`.
    #[serde(default = "default_label_stride")]
    pub label_stride: [usize; 2],
    /// Window `[0, slope_window]` of the initial-slope fit, sampled ten times.
    #[serde(default = "default_slope_window")]
    pub slope_window: f64,
    #[serde(default)]
    pub checkpoint: CheckpointFormat,
    /// Fixed steps are this fraction of the base flow's CFL step.
    #[serde(default = "default_dt_safety")]
    pub dt_safety: f64,
}

impl ExperimentConfig {
    /// Reference configuration: smoothed Couette on the `128 x 128m` grid, `m` in {4, 8}.
    pub fn reference() -> Self {
        Self {
            grid: GridConfig {
                n1: 128,
                n2_per_m: 128,
            },
            profile: ProfileSpec::SmoothedCouette { delta: 0.2 },
            m_list: vec![4, 8],
            sigma_list: vec![1e-2, 5e-3, 2.5e-3],
            u_in: InitialPerturbation::default(),
            epsilon: default_epsilon(),
            horizon: 20.0,
            sample_dt: default_sample_dt(),
            cfl: default_cfl(),
            output_dir: default_output_dir(),
            route: Route::Linearized,
            tau_d: default_tau_d(),
            label_stride: default_label_stride(),
            slope_window: default_slope_window(),
            checkpoint: CheckpointFormat::None,
            dt_safety: default_dt_safety(),
        }
    }

    pub fn n2(&self, m: usize) -> usize {
        self.grid.n2_per_m * m
    }

    pub fn grid_for(&self, m: usize) -> Result<TorusGrid> {
        TorusGrid::new(self.grid.n1, self.n2(m), m)
            .map_err(|e| Error::config("grid", e.to_string()))
    }

    /// Parses JSON or TOML (by extension, else whichever parses) and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        let cfg = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text)?,
            Some("json") => Self::from_json(&text)?,
            _ => Self::from_json(&text).or_else(|_| Self::from_toml(&text))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            Error::config(field, e.into_inner().to_string())
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            Error::config(field, e.into_inner().message().to_owned())
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(
                    field,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        };
        if self.m_list.is_empty() {
            return Err(Error::config("m_list", "must not be empty"));
        }
        if self.m_list.contains(&0) {
            return Err(Error::config("m_list", "entries must be at least 1"));
        }
        let mut ms = self.m_list.clone();
        ms.sort_unstable();
        if ms.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("m_list", "entries must be distinct"));
        }
        if self.sigma_list.is_empty() {
            return Err(Error::config("sigma_list", "must not be empty"));
        }
        for &s in &self.sigma_list {
            positive("sigma_list", s)?;
        }
        if self.sigma_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::config("sigma_list", "must be strictly decreasing"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config(
                "epsilon",
                format!("must lie in (0, 1), got {}", self.epsilon),
            ));
        }
        positive("horizon", self.horizon)?;
        positive("sample_dt", self.sample_dt)?;
        if self.sample_dt > self.horizon {
            return Err(Error::config("sample_dt", "must not exceed the horizon"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::config(
                "cfl",
                format!("must lie in (0, 1], got {}", self.cfl),
            ));
        }
        if !(self.tau_d >= 0.0 && self.tau_d < 1.0) {
            return Err(Error::config(
                "tau_d",
                format!("must lie in [0, 1), got {}", self.tau_d),
            ));
        }
        positive("slope_window", self.slope_window)?;
        if self.slope_window > self.horizon {
            return Err(Error::config("slope_window", "must not exceed the horizon"));
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return Err(Error::config(
                "dt_safety",
                format!("must lie in (0, 1], got {}", self.dt_safety),
            ));
        }
        let m_min = ms[0];
        self.u_in.validate(m_min)?;
        for &m in &ms {
            let grid = self.grid_for(m)?;
            let [s1, s2] = self.label_stride;
            if s1 == 0 || s2 == 0 || grid.n1() % s1 != 0 || grid.n2() % s2 != 0 {
                return Err(Error::config("label_stride", "must divide the grid sizes"));
            }
            if grid.n1() / s1 < 4 || grid.n2() / s2 < 4 {
                return Err(Error::config(
                    "label_stride",
                    "leaves fewer than 4 labels per axis",
                ));
            }
            ShearProfile::new(self.profile.clone(), m)
                .and_then(|p| p.vorticity(&grid).map(|_| ()))
                .map_err(|e| Error::config("profile", format!("m = {m}: {e}")))?;
        }
        Ok(())
    }

    /// Sample times: 0, ten points over the slope window, then every
    /// `sample_dt` up to the horizon (which is always included).
    pub fn sample_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = (0..=10)
            .map(|i| self.slope_window * i as f64 / 10.0)
            .collect();
        let n = (self.horizon / self.sample_dt * (1.0 + 1e-12)).floor() as usize;
        t.extend((1..=n).map(|i| self.sample_dt * i as f64));
        t.push(self.horizon);
        t.retain(|&x| x <= self.horizon);
        t.sort_by(f64::total_cmp);
        t.dedup_by(|b, a| (*b - *a).abs() <= 1e-9 * self.sample_dt.min(self.slope_window));
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(err: Error) -> String {
        match err {
            Error::Config { field, .. } => field,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn reference_is_valid_and_round_trips() {
        let cfg = ExperimentConfig::reference();
        cfg.validate().unwrap();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        let toml_text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&toml_text).unwrap(), cfg);
    }

    #[test]
    fn minimal_json_uses_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"grid": {"n1": 32, "n2_per_m": 32},
                "profile": {"family": "kolmogorov", "amplitude": 1.0, "wavenumber": 1.0},
                "m_list": [2], "sigma_list": [1e-3], "horizon": 1.0}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.epsilon, 0.1);
        assert_eq!(cfg.tau_d, 0.02);
        assert_eq!(cfg.route, Route::Linearized);
        assert_eq!(cfg.u_in.norm, Some(1.0));
    }

    #[test]
    fn parse_errors_name_the_field() {
        let base = ExperimentConfig::reference().to_json();
        let unknown = base.replacen("\"horizon\"", "\"horizen\"", 1);
        let msg = ExperimentConfig::from_json(&unknown)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("horizen"), "{msg}");
        let wrong_type = base.replacen("\"n1\": 128", "\"n1\": \"many\"", 1);
        assert_eq!(
            field_of(ExperimentConfig::from_json(&wrong_type).unwrap_err()),
            "grid.n1"
        );
        let bad_family = base.replacen("smoothed_couette", "plane_poiseuille", 1);
        let msg = ExperimentConfig::from_json(&bad_family)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("profile"), "{msg}");
    }

    #[test]
    fn invariants_are_enforced() {
        let check = |edit: fn(&mut ExperimentConfig), field: &str| {
            let mut cfg = ExperimentConfig::reference();
            edit(&mut cfg);
            let f = field_of(cfg.validate().expect_err(field));
            assert!(f.starts_with(field), "expected {field}, got {f}");
        };
        check(|c| c.sigma_list = vec![1e-3, 1e-2], "sigma_list");
        check(|c| c.sigma_list = vec![1e-2, 0.0], "sigma_list");
        check(|c| c.sigma_list.clear(), "sigma_list");
        check(|c| c.epsilon = 0.0, "epsilon");
        check(|c| c.epsilon = 1.5, "epsilon");
        check(|c| c.m_list = vec![], "m_list");
        check(|c| c.m_list = vec![4, 4], "m_list");
        check(|c| c.u_in.width = 5.0, "u_in");
        check(|c| c.horizon = -1.0, "horizon");
        check(|c| c.label_stride = [3, 2], "label_stride");
        check(|c| c.grid.n2_per_m = 16, "profile");
        check(
            |c| c.profile = ProfileSpec::SmoothedCouette { delta: 2.0 },
            "profile",
        );
    }

    #[test]
    fn sample_times_cover_the_slope_window_and_horizon() {
        let mut cfg = ExperimentConfig::reference();
        cfg.horizon = 1.0;
        let t = cfg.sample_times();
        assert_eq!(t[0], 0.0);
        assert_eq!(*t.last().unwrap(), 1.0);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(
            t.iter().filter(|&&x| x > 0.0 && x <= 0.1 + 1e-12).count(),
            10
        );
        assert!(t.windows(2).all(|w| w[1] - w[0] <= cfg.sample_dt + 1e-12));
        // 0.05 and 0.1 from both lists appear once.
        assert_eq!(t.len(), 11 + 18);
    }
}
