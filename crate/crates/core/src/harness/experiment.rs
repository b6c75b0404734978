//! Sweeps over `(m, sigma)` cells: the shared per-`m` linearized run, one
//! nonlinear run per cell, series assembly and checks.

use std::cell::RefCell;
use std::collections::BTreeMap;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checks::{self, CheckContext, CheckEntry};
use super::config::{ExperimentConfig, Route};
use super::series::{PerturbationSeries, SampleNorms};
use crate::error::{Error, Result};
use crate::euler::{outer_shell_fraction, Euler, FlowState, SHELL_WARN_FRACTION};
use crate::field::SpectralField;
use crate::grid::TorusGrid;
use crate::lagrangian::{self, JacobiField, LabelGrid, ShearBase};
use crate::linear::LinearizedEuler;
use crate::profile::ShearProfile;
use crate::stepping::{self, cfl_bound, TimeStepping};
use crate::velocity::velocity_from_vorticity;

/// Directory name of a cell, e.g. `m4_s0.01`.
pub fn cell_name(m: usize, sigma: f64) -> String {
    format!("m{m}_s{sigma}")
}

/// Everything shared by the cells of one `m`.
#[derive(Debug, Clone)]
pub struct Setup {
    pub m: usize,
    pub grid: TorusGrid,
    pub base: FlowState,
    /// Vorticity of `U_in`.
    pub u_in: SpectralField,
    pub u_in_norm: f64,
    pub u_inf_norm: f64,
    pub sup_fprime: f64,
    pub labels: LabelGrid,
    pub dt: f64,
    pub times: Vec<f64>,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig, m: usize) -> Result<Self> {
        let grid = cfg.grid_for(m)?;
        let profile = ShearProfile::new(cfg.profile.clone(), m)?;
        let (omega, mean) = profile.vorticity(&grid)?;
        let base = FlowState::new(omega, mean)?;
        let (u_in, u_in_velocity) = cfg.u_in.build(&grid)?;
        let u_inf = base.velocity()?;
        let speed = stepping::max_speeds(&u_inf);
        let dt = cfg.dt_safety * cfl_bound(&grid, speed, cfg.cfl);
        let sup_fprime = base
            .omega
            .to_values()
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        let labels = LabelGrid::subgrid(&grid, cfg.label_stride[0], cfg.label_stride[1])?;
        Ok(Self {
            m,
            u_in_norm: u_in_velocity.l2_norm(),
            u_inf_norm: u_inf.l2_norm(),
            grid,
            base,
            u_in,
            sup_fprime,
            labels,
            dt,
            times: cfg.sample_times(),
        })
    }

    pub fn policy(&self, cfg: &ExperimentConfig) -> TimeStepping {
        TimeStepping::Fixed {
            dt: self.dt,
            cfl: cfg.cfl,
        }
    }
}

/// Linearized norms and Jacobi norms at the sample times.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JacobiTrack {
    pub du: Vec<(f64, f64)>,
    pub j: Vec<(f64, f64)>,
}

impl JacobiTrack {
    pub fn initial_slope(&self, times: &[f64], window: f64) -> Result<f64> {
        let norms: Vec<f64> = self.j.iter().map(|j| j.0.hypot(j.1)).collect();
        lagrangian::initial_slope(times, &norms, window)
    }
}

/// Linearized Euler from `U_in` with the Jacobi field carried along the shear.
pub fn linearized_track(cfg: &ExperimentConfig, s: &Setup) -> Result<JacobiTrack> {
    linearized_run(cfg, s, false).map(|r| r.0)
}

/// Like [`linearized_track`], also returning the Jacobi field at every sample.
pub fn linearized_fields(
    cfg: &ExperimentConfig,
    s: &Setup,
) -> Result<(JacobiTrack, Vec<JacobiField>)> {
    linearized_run(cfg, s, true)
}

fn linearized_run(
    cfg: &ExperimentConfig,
    s: &Setup,
    keep: bool,
) -> Result<(JacobiTrack, Vec<JacobiField>)> {
    let system = LinearizedEuler::from_base(&s.base.omega, s.base.mean)?;
    let shear = ShearBase::new(&s.base.omega, s.base.mean)?;
    let state = RefCell::new((shear.flow_map(s.labels, 0.0), JacobiField::zero(s.labels)));
    let mut track = JacobiTrack::default();
    let mut fields = Vec::new();
    stepping::integrate(
        &system,
        &s.u_in,
        0.0,
        &s.times,
        s.policy(cfg),
        |st| {
            let mut st_ref = state.borrow_mut();
            let (fm, jf) = &mut *st_ref;
            let next = lagrangian::jacobi_step(jf, fm, st, &shear, st.dt)?;
            *fm = shear.advance(fm, st.dt);
            *jf = next;
            Ok(())
        },
        |t, omega| {
            let mut st_ref = state.borrow_mut();
            let (fm, jf) = &mut *st_ref;
            // Land the particle clocks on the integrator's clock.
            fm.t = t;
            jf.t = t;
            let u = velocity_from_vorticity(omega, (0.0, 0.0))?;
            track.du.push((u.u1.l2_norm(), u.u2.l2_norm()));
            let n = jf.norms();
            track.j.push((n.j1, n.j2));
            if keep {
                fields.push(jf.clone());
            }
            Ok(())
        },
    )?;
    Ok((track, fields))
}

/// Finite-difference route for one `sigma`.
pub fn fd_track(cfg: &ExperimentConfig, s: &Setup, sigma: f64) -> Result<JacobiTrack> {
    let samples =
        lagrangian::fd_jacobi(&s.base, &s.u_in, sigma, s.labels, &s.times, s.policy(cfg))?;
    Ok(JacobiTrack {
        du: samples.iter().map(|x| x.du).collect(),
        j: samples
            .iter()
            .map(|x| {
                let n = x.jacobi.norms();
                (n.j1, n.j2)
            })
            .collect(),
    })
}

/// Perturbation norms and diagnostics of the nonlinear run from `u_inf + sigma U_in`.
#[derive(Debug, Clone)]
pub struct NonlinearTrack {
    pub u: Vec<(f64, f64)>,
    pub energy: Vec<f64>,
    pub enstrophy: Vec<f64>,
    pub u0_norm: f64,
    pub final_state: FlowState,
}

pub fn nonlinear_track(cfg: &ExperimentConfig, s: &Setup, sigma: f64) -> Result<NonlinearTrack> {
    let mut omega0 = s.base.omega.clone();
    omega0.axpy(sigma, &s.u_in);
    let state0 = FlowState::new(omega0, s.base.mean)?;
    let u0_norm = state0.velocity()?.l2_norm();
    let mut u = Vec::with_capacity(s.times.len());
    let mut energy = Vec::with_capacity(s.times.len());
    let mut enstrophy = Vec::with_capacity(s.times.len());
    let mut warned = false;
    let last = stepping::integrate(
        &Euler { mean: state0.mean },
        &state0.omega,
        0.0,
        &s.times,
        s.policy(cfg),
        |_| Ok(()),
        |t, omega| {
            let pert = velocity_from_vorticity(&omega.sub(&s.base.omega), (0.0, 0.0))?;
            u.push((pert.u1.l2_norm(), pert.u2.l2_norm()));
            let full = velocity_from_vorticity(omega, state0.mean)?;
            energy.push(0.5 * full.l2_norm().powi(2));
            enstrophy.push(0.5 * omega.l2_norm().powi(2));
            let shell = outer_shell_fraction(omega);
            if !warned && shell > SHELL_WARN_FRACTION {
                warn!(
                    "{}: outer spectral shell holds {shell:.2e} of enstrophy at t = {t}",
                    cell_name(s.m, sigma)
                );
                warned = true;
            }
            Ok(())
        },
    )?;
    let t_end = *s.times.last().unwrap_or(&0.0);
    Ok(NonlinearTrack {
        u,
        energy,
        enstrophy,
        u0_norm,
        final_state: FlowState::at_time(last, state0.mean, t_end)?,
    })
}

/// Constants stored beside a cell's series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMeta {
    pub cell: String,
    pub m: usize,
    pub n1: usize,
    pub n2: usize,
    pub profile: String,
    pub route: Route,
    pub dt: f64,
    pub initial_slope: Option<f64>,
    pub context: CheckContext,
}

/// A finished cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub meta: CellMeta,
    pub series: PerturbationSeries,
    /// Finite-difference series when both routes ran.
    pub fd_series: Option<PerturbationSeries>,
    pub checks: Vec<CheckEntry>,
    pub final_state: Option<FlowState>,
}

impl CellResult {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Outcome of one `(m, sigma)` cell.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub m: usize,
    pub sigma: f64,
    pub result: std::result::Result<CellResult, String>,
}

impl CellOutcome {
    pub fn name(&self) -> String {
        cell_name(self.m, self.sigma)
    }
}

fn assemble(times: &[f64], nl: &NonlinearTrack, jac: &JacobiTrack) -> Result<PerturbationSeries> {
    if nl.u.len() != times.len() || jac.j.len() != times.len() || jac.du.len() != times.len() {
        return Err(Error::Validation(
            "runs returned different sample counts".into(),
        ));
    }
    let samples: Vec<SampleNorms> = (0..times.len())
        .map(|i| SampleNorms {
            t: times[i],
            u: nl.u[i],
            du: jac.du[i],
            j: jac.j[i],
            energy: nl.energy[i],
            enstrophy: nl.enstrophy[i],
        })
        .collect();
    PerturbationSeries::from_samples(&samples)
}

/// `|a - b| / max(|a|, |b|)` over the `dU` and `J` columns of two series; margin `tau_d - worst`.
pub fn cross_route_check(
    lin: &PerturbationSeries,
    fd: &PerturbationSeries,
    tau_d: f64,
) -> CheckEntry {
    let rel = |a: f64, b: f64| {
        let s = a.abs().max(b.abs());
        if s > 0.0 {
            (a - b).abs() / s
        } else {
            0.0
        }
    };
    let (t, worst) = lin
        .rows
        .iter()
        .zip(&fd.rows)
        .map(|(a, b)| {
            let r = rel(a.du1, b.du1)
                .max(rel(a.du2, b.du2))
                .max(rel(a.j1, b.j1))
                .max(rel(a.j2, b.j2));
            (a.t, r)
        })
        .fold((0.0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    CheckEntry {
        check_name: "cross_route".into(),
        pass: worst <= tau_d,
        worst_t: Some(t),
        margin: tau_d - worst,
        note: Some(format!("largest relative disagreement {worst:.3e}")),
    }
}

fn build_cell(
    cfg: &ExperimentConfig,
    s: &Setup,
    sigma: f64,
    lin: Option<&JacobiTrack>,
    fd: Option<&JacobiTrack>,
    nl: &NonlinearTrack,
) -> Result<CellResult> {
    let primary = lin
        .or(fd)
        .ok_or_else(|| Error::Validation("no Jacobi route ran".into()))?;
    let series = assemble(&s.times, nl, primary)?;
    let fd_series = match (lin, fd) {
        (Some(_), Some(f)) => Some(assemble(&s.times, nl, f)?),
        _ => None,
    };
    let context = CheckContext {
        sigma,
        epsilon: cfg.epsilon,
        tau_d: cfg.tau_d,
        u_in_norm: s.u_in_norm,
        sup_fprime: s.sup_fprime,
        u0_norm: nl.u0_norm,
        u_inf_norm: s.u_inf_norm,
    };
    let mut entries = checks::run_checks(&series, &context)?;
    if let Some(fs) = &fd_series {
        entries.push(cross_route_check(&series, fs, cfg.tau_d));
    }
    let meta = CellMeta {
        cell: cell_name(s.m, sigma),
        m: s.m,
        n1: s.grid.n1(),
        n2: s.grid.n2(),
        profile: cfg.profile.family_name().into(),
        route: cfg.route,
        dt: s.dt,
        initial_slope: primary.initial_slope(&s.times, cfg.slope_window).ok(),
        context,
    };
    Ok(CellResult {
        meta,
        series,
        fd_series,
        checks: entries,
        final_state: Some(nl.final_state.clone()),
    })
}

enum Job {
    Linear(usize),
    Fd(usize, usize),
    Nonlinear(usize, usize),
}

enum JobOutput {
    Jacobi(JacobiTrack),
    Nonlinear(Box<NonlinearTrack>),
}

/// Runs every `(m, sigma)` cell of the config with at most `threads` workers
/// (all cores when `None`). Failures are recorded per cell.
pub fn run_cells(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<CellOutcome>> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    pool.install(|| run_cells_in_pool(cfg))
}

fn run_cells_in_pool(cfg: &ExperimentConfig) -> Result<Vec<CellOutcome>> {
    let setups: Vec<std::result::Result<Setup, String>> = cfg
        .m_list
        .par_iter()
        .map(|&m| Setup::new(cfg, m).map_err(|e| e.to_string()))
        .collect();
    let mut jobs = Vec::new();
    for (mi, setup) in setups.iter().enumerate() {
        if setup.is_err() {
            continue;
        }
        // Largest grids first for better packing.
        for si in 0..cfg.sigma_list.len() {
            jobs.push(Job::Nonlinear(mi, si));
            if cfg.route.fd() {
                jobs.push(Job::Fd(mi, si));
            }
        }
        if cfg.route.linearized() {
            jobs.push(Job::Linear(mi));
        }
    }
    // (m index, sigma index, fd route, output)
    type JobResult = (
        usize,
        Option<usize>,
        bool,
        std::result::Result<JobOutput, String>,
    );
    jobs.sort_by_key(|j| {
        let mi = match j {
            Job::Linear(mi) | Job::Fd(mi, _) | Job::Nonlinear(mi, _) => *mi,
        };
        std::cmp::Reverse(cfg.m_list[mi])
    });
    let results: Vec<JobResult> = jobs
        .par_iter()
        .map(|job| {
            let setup = |mi: usize| setups[mi].as_ref().expect("jobs only for valid setups");
            match *job {
                Job::Linear(mi) => {
                    info!("linearized run m = {}", cfg.m_list[mi]);
                    let r = linearized_track(cfg, setup(mi)).map(JobOutput::Jacobi);
                    (mi, None, false, r.map_err(|e| e.to_string()))
                }
                Job::Fd(mi, si) => {
                    let r = fd_track(cfg, setup(mi), cfg.sigma_list[si]).map(JobOutput::Jacobi);
                    (mi, Some(si), true, r.map_err(|e| e.to_string()))
                }
                Job::Nonlinear(mi, si) => {
                    info!(
                        "nonlinear run {}",
                        cell_name(cfg.m_list[mi], cfg.sigma_list[si])
                    );
                    let r = nonlinear_track(cfg, setup(mi), cfg.sigma_list[si])
                        .map(|t| JobOutput::Nonlinear(Box::new(t)));
                    (mi, Some(si), false, r.map_err(|e| e.to_string()))
                }
            }
        })
        .collect();
    let mut linear: BTreeMap<usize, std::result::Result<JacobiTrack, String>> = BTreeMap::new();
    let mut fd: BTreeMap<(usize, usize), std::result::Result<JacobiTrack, String>> =
        BTreeMap::new();
    let mut nonlinear: BTreeMap<(usize, usize), std::result::Result<NonlinearTrack, String>> =
        BTreeMap::new();
    for (mi, si, is_fd, r) in results {
        match (si, is_fd, r) {
            (None, _, r) => {
                linear.insert(
                    mi,
                    r.map(|o| match o {
                        JobOutput::Jacobi(j) => j,
                        JobOutput::Nonlinear(_) => unreachable!(),
                    }),
                );
            }
            (Some(si), true, r) => {
                fd.insert(
                    (mi, si),
                    r.map(|o| match o {
                        JobOutput::Jacobi(j) => j,
                        JobOutput::Nonlinear(_) => unreachable!(),
                    }),
                );
            }
            (Some(si), false, r) => {
                nonlinear.insert(
                    (mi, si),
                    r.map(|o| match o {
                        JobOutput::Nonlinear(n) => *n,
                        JobOutput::Jacobi(_) => unreachable!(),
                    }),
                );
            }
        }
    }
    let mut out = Vec::new();
    for (mi, &m) in cfg.m_list.iter().enumerate() {
        for (si, &sigma) in cfg.sigma_list.iter().enumerate() {
            let result = (|| -> std::result::Result<CellResult, String> {
                let s = setups[mi].as_ref().map_err(|e| format!("setup: {e}"))?;
                let lin = match linear.get(&mi) {
                    Some(Ok(j)) => Some(j),
                    Some(Err(e)) => return Err(format!("linearized run: {e}")),
                    None => None,
                };
                let fdj = match fd.get(&(mi, si)) {
                    Some(Ok(j)) => Some(j),
                    Some(Err(e)) => return Err(format!("finite-difference run: {e}")),
                    None => None,
                };
                let nl = match nonlinear.get(&(mi, si)) {
                    Some(Ok(n)) => n,
                    Some(Err(e)) => return Err(format!("nonlinear run: {e}")),
                    None => return Err("nonlinear run missing".into()),
                };
                build_cell(cfg, s, sigma, lin, fdj, nl).map_err(|e| e.to_string())
            })();
            if let Err(e) = &result {
                warn!("cell {} failed: {e}", cell_name(m, sigma));
            }
            out.push(CellOutcome { m, sigma, result });
        }
    }
    Ok(out)
}

/// A single cell outside any sweep (also used for `sigma = 0`).
pub fn run_single_cell(cfg: &ExperimentConfig, m: usize, sigma: f64) -> Result<CellResult> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::config(
            "sigma",
            format!("must be nonnegative, got {sigma}"),
        ));
    }
    let s = Setup::new(cfg, m)?;
    let lin = if cfg.route.linearized() {
        Some(linearized_track(cfg, &s)?)
    } else {
        None
    };
    let fd = if cfg.route.fd() && sigma > 0.0 {
        Some(fd_track(cfg, &s, sigma)?)
    } else {
        None
    };
    let nl = nonlinear_track(cfg, &s, sigma)?;
    build_cell(cfg, &s, sigma, lin.as_ref(), fd.as_ref(), &nl)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::profile::ProfileSpec;

    /// A small Kolmogorov sweep that runs in well under a second.
    pub(crate) fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::reference();
        cfg.grid.n1 = 16;
        cfg.grid.n2_per_m = 16;
        cfg.profile = ProfileSpec::Kolmogorov {
            amplitude: 1.0,
            wavenumber: 1.0,
        };
        cfg.m_list = vec![2];
        cfg.sigma_list = vec![1e-3];
        cfg.horizon = 2.0;
        cfg.sample_dt = 0.1;
        cfg
    }

    #[test]
    fn kolmogorov_cell_passes_every_check() {
        let cfg = small_config();
        let r = run_single_cell(&cfg, 2, 1e-3).unwrap();
        for c in &r.checks {
            assert!(c.pass, "{c:?}");
        }
        assert_eq!(r.series.len(), cfg.sample_times().len());
        let slope = r.meta.initial_slope.unwrap();
        assert!((slope - r.meta.context.u_in_norm).abs() < 1e-2 * r.meta.context.u_in_norm);
    }

    #[test]
    fn unperturbed_cell_is_stationary() {
        let cfg = small_config();
        let r = run_single_cell(&cfg, 2, 0.0).unwrap();
        assert!(r.series.rows.iter().all(|row| row.u() <= 1e-9));
        let stat = r
            .checks
            .iter()
            .find(|c| c.check_name == "stationarity")
            .unwrap();
        assert!(stat.pass);
    }

    #[test]
    fn linearized_columns_do_not_depend_on_sigma() {
        let cfg = small_config();
        let a = run_single_cell(&cfg, 2, 1e-3).unwrap();
        let b = run_single_cell(&cfg, 2, 5e-4).unwrap();
        assert_eq!(a.series.column(|r| r.j), b.series.column(|r| r.j));
        assert_eq!(a.series.column(|r| r.du2), b.series.column(|r| r.du2));
    }

    #[test]
    fn failed_cells_do_not_abort_siblings() {
        let mut cfg = small_config();
        // The fixed step is sized for the shear; a huge perturbation breaks its CFL bound.
        cfg.sigma_list = vec![50.0, 1e-3];
        let cells = run_cells(&cfg, Some(1)).unwrap();
        assert_eq!(cells.len(), 2);
        let err = cells[0].result.as_ref().unwrap_err();
        assert!(err.contains("CFL") || err.contains("exceeds"), "{err}");
        assert!(cells[1].result.as_ref().unwrap().pass());
    }

    #[test]
    fn both_routes_agree_on_a_small_cell() {
        let mut cfg = small_config();
        cfg.route = Route::Both;
        let r = run_single_cell(&cfg, 2, 1e-3).unwrap();
        let cross = r
            .checks
            .iter()
            .find(|c| c.check_name == "cross_route")
            .unwrap();
        assert!(cross.pass, "{cross:?}");
        assert!(r.fd_series.is_some());
    }
}
