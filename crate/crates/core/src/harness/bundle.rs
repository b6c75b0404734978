//! Result bundles on disk and the sweep-level summary.
//!
//! ```text
//! <output_dir>/config.json
//! <output_dir>/summary.json
//! <output_dir>/<cell>/series.csv       (series_fd.csv when both routes ran)
//! <output_dir>/<cell>/checks.json
//! <output_dir>/<cell>/meta.json
//! <output_dir>/<cell>/final_state.{bin,csv}   (when checkpoints are enabled)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::checks::{self, CheckEntry};
use super::config::ExperimentConfig;
use super::experiment::{cell_name, cross_route_check, CellMeta, CellOutcome, CellResult};
use super::series::PerturbationSeries;
use crate::checkpoint::{self, CheckpointFormat};
use crate::error::{Error, Result};

/// Relative spread allowed for quantities that should not depend on `m`.
pub const M_INDEPENDENCE_TOL: f64 = 0.05;
/// Largest ratio of `inf_t D` across the sigma list.
pub const SIGMA_SPREAD_MAX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: String,
    pub m: usize,
    pub sigma: f64,
    /// `None` when the cell failed to run.
    pub pass: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub failed_checks: Vec<String>,
    pub inf_d: Option<f64>,
    pub inf_d_t: Option<f64>,
    pub collapse_k: Option<f64>,
    pub initial_slope: Option<f64>,
    pub u_in_norm: Option<f64>,
}

/// `inf_t D` over the `sigma x m` grid; rows follow `m_list`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorTable {
    pub m_list: Vec<usize>,
    pub sigma_list: Vec<f64>,
    pub inf_d: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cells: Vec<CellSummary>,
    pub indicator: IndicatorTable,
    pub sweep_checks: Vec<CheckEntry>,
    pub failed_cells: usize,
    pub checker_failures: usize,
}

impl Summary {
    /// 0 when everything ran and passed, 2 on any checker failure, else 1 when cells failed to run.
    pub fn exit_code(&self) -> i32 {
        if self.checker_failures > 0 {
            2
        } else if self.failed_cells > 0 {
            1
        } else {
            0
        }
    }
}

fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        (max - min) / max
    } else {
        0.0
    }
}

fn spread_entry(name: String, values: &[f64], tol: f64) -> CheckEntry {
    let spread = relative_spread(values);
    CheckEntry {
        check_name: name,
        pass: spread < tol,
        worst_t: None,
        margin: tol - spread,
        note: Some(format!(
            "relative spread {spread:.3e} over {} values",
            values.len()
        )),
    }
}

/// Checks across cells: sigma spread of `inf_t D`, `m`-independence, and
/// stability of the collapse constant under sigma-halving.
pub fn sweep_checks(cfg: &ExperimentConfig, cells: &[CellSummary]) -> Vec<CheckEntry> {
    let ok = |c: &&CellSummary| c.pass.is_some();
    let mut out = Vec::new();
    for &m in &cfg.m_list {
        let row: Vec<&CellSummary> = cells
            .iter()
            .filter(ok)
            .filter(|c| c.m == m && c.sigma > 0.0)
            .collect();
        let d: Vec<f64> = row.iter().filter_map(|c| c.inf_d).collect();
        if d.len() >= 2 {
            let max = d.iter().copied().fold(0.0, f64::max);
            let min = d.iter().copied().fold(f64::INFINITY, f64::min);
            let ratio = if min > 0.0 { max / min } else { f64::INFINITY };
            out.push(CheckEntry {
                check_name: format!("indicator_sigma_spread_m{m}"),
                pass: ratio < SIGMA_SPREAD_MAX,
                worst_t: None,
                margin: (SIGMA_SPREAD_MAX - ratio) / SIGMA_SPREAD_MAX,
                note: Some(format!("max/min of inf D is {ratio:.4}")),
            });
        }
        // The bound K sigma measured at the largest sigma must keep holding as
        // sigma is halved: no later K may exceed twice the first.
        let k: Vec<f64> = row.iter().filter_map(|c| c.collapse_k).collect();
        if k.len() >= 2 {
            let worst = k[1..].iter().copied().fold(0.0, f64::max);
            let limit = 2.0 * k[0];
            out.push(CheckEntry {
                check_name: format!("collapse_stability_m{m}"),
                pass: worst <= limit,
                worst_t: None,
                margin: if limit > 0.0 {
                    (limit - worst) / limit
                } else {
                    -1.0
                },
                note: Some(format!("K per sigma: {k:?}")),
            });
        }
    }
    if cfg.m_list.len() >= 2 {
        let per_m = |f: fn(&CellSummary) -> Option<f64>| -> Vec<f64> {
            cfg.m_list
                .iter()
                .filter_map(|&m| cells.iter().filter(ok).find(|c| c.m == m).and_then(f))
                .collect()
        };
        for (name, vals) in [
            ("m_independence_u_in", per_m(|c| c.u_in_norm)),
            ("m_independence_slope", per_m(|c| c.initial_slope)),
        ] {
            if vals.len() >= 2 {
                out.push(spread_entry(name.into(), &vals, M_INDEPENDENCE_TOL));
            }
        }
        for &sigma in &cfg.sigma_list {
            let d: Vec<f64> = cells
                .iter()
                .filter(ok)
                .filter(|c| c.sigma == sigma)
                .filter_map(|c| c.inf_d)
                .collect();
            if d.len() >= 2 {
                out.push(spread_entry(
                    format!("m_independence_indicator_s{sigma}"),
                    &d,
                    M_INDEPENDENCE_TOL,
                ));
            }
        }
    }
    out
}

fn cell_summary(o: &CellOutcome, epsilon: f64) -> CellSummary {
    let mut s = CellSummary {
        cell: o.name(),
        m: o.m,
        sigma: o.sigma,
        pass: None,
        error: None,
        failed_checks: Vec::new(),
        inf_d: None,
        inf_d_t: None,
        collapse_k: None,
        initial_slope: None,
        u_in_norm: None,
    };
    match &o.result {
        Err(e) => s.error = Some(e.clone()),
        Ok(r) => {
            s.pass = Some(r.pass());
            s.failed_checks = r
                .checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| c.check_name.clone())
                .collect();
            if o.sigma > 0.0 {
                if let Ok((d, t)) = checks::lower_bound_indicator(&r.series, o.sigma, epsilon) {
                    s.inf_d = Some(d);
                    s.inf_d_t = Some(t);
                }
                s.collapse_k = checks::collapse_constant(&r.series, o.sigma).ok();
            }
            s.initial_slope = r.meta.initial_slope;
            s.u_in_norm = Some(r.meta.context.u_in_norm);
        }
    }
    s
}

pub fn summarize(cfg: &ExperimentConfig, outcomes: &[CellOutcome]) -> Summary {
    let cells: Vec<CellSummary> = outcomes
        .iter()
        .map(|o| cell_summary(o, cfg.epsilon))
        .collect();
    let inf_d = cfg
        .m_list
        .iter()
        .map(|&m| {
            cfg.sigma_list
                .iter()
                .map(|&s| {
                    cells
                        .iter()
                        .find(|c| c.m == m && c.sigma == s)
                        .and_then(|c| c.inf_d)
                })
                .collect()
        })
        .collect();
    let sweep = sweep_checks(cfg, &cells);
    let checker_failures = cells.iter().map(|c| c.failed_checks.len()).sum::<usize>()
        + sweep.iter().filter(|c| !c.pass).count();
    Summary {
        failed_cells: cells.iter().filter(|c| c.pass.is_none()).count(),
        checker_failures,
        indicator: IndicatorTable {
            m_list: cfg.m_list.clone(),
            sigma_list: cfg.sigma_list.clone(),
            inf_d,
        },
        sweep_checks: sweep,
        cells,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes the bundle into `dir` and returns its summary.
pub fn write_bundle(
    cfg: &ExperimentConfig,
    outcomes: &[CellOutcome],
    dir: &Path,
) -> Result<Summary> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("config.json"), cfg)?;
    for o in outcomes {
        let Ok(r) = &o.result else { continue };
        let cell_dir = dir.join(o.name());
        std::fs::create_dir_all(&cell_dir)?;
        r.series.save(&cell_dir.join("series.csv"))?;
        if let Some(fd) = &r.fd_series {
            fd.save(&cell_dir.join("series_fd.csv"))?;
        }
        write_json(&cell_dir.join("checks.json"), &r.checks)?;
        write_json(&cell_dir.join("meta.json"), &r.meta)?;
        if let Some(state) = &r.final_state {
            let name = match cfg.checkpoint {
                CheckpointFormat::None => None,
                CheckpointFormat::Binary => Some("final_state.bin"),
                CheckpointFormat::Csv => Some("final_state.csv"),
            };
            if let Some(name) = name {
                checkpoint::save(state, &cell_dir.join(name), cfg.checkpoint)?;
            }
        }
    }
    let summary = summarize(cfg, outcomes);
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Reads a bundle back; cells without stored results keep the recorded error.
pub fn load_bundle(dir: &Path) -> Result<(ExperimentConfig, Vec<CellOutcome>)> {
    let cfg: ExperimentConfig = read_json(&dir.join("config.json"))?;
    let recorded: Option<Summary> = read_json(&dir.join("summary.json")).ok();
    let mut out = Vec::new();
    for &m in &cfg.m_list {
        for &sigma in &cfg.sigma_list {
            let name = cell_name(m, sigma);
            let cell_dir = dir.join(&name);
            let result = if cell_dir.join("meta.json").exists() {
                let meta: CellMeta = read_json(&cell_dir.join("meta.json"))?;
                let checks: Vec<CheckEntry> = read_json(&cell_dir.join("checks.json"))?;
                let series = PerturbationSeries::load(&cell_dir.join("series.csv"))?;
                let fd_path = cell_dir.join("series_fd.csv");
                let fd_series = if fd_path.exists() {
                    Some(PerturbationSeries::load(&fd_path)?)
                } else {
                    None
                };
                Ok(CellResult {
                    meta,
                    series,
                    fd_series,
                    checks,
                    final_state: None,
                })
            } else {
                let err = recorded
                    .as_ref()
                    .and_then(|s| s.cells.iter().find(|c| c.cell == name))
                    .and_then(|c| c.error.clone())
                    .unwrap_or_else(|| "no stored results".into());
                Err(err)
            };
            out.push(CellOutcome { m, sigma, result });
        }
    }
    Ok((cfg, out))
}

/// Re-runs every checker on the stored series of a bundle (nothing is rewritten).
pub fn recheck(dir: &Path) -> Result<(ExperimentConfig, Vec<CellOutcome>, Summary)> {
    let (cfg, mut cells) = load_bundle(dir)?;
    for c in &mut cells {
        if let Ok(r) = &mut c.result {
            let mut entries = checks::run_checks(&r.series, &r.meta.context)?;
            if let Some(fd) = &r.fd_series {
                entries.push(cross_route_check(&r.series, fd, r.meta.context.tau_d));
            }
            r.checks = entries;
        }
    }
    let summary = summarize(&cfg, &cells);
    Ok((cfg, cells, summary))
}
