//! Classical RK4 on spectral vorticity systems, with access to the stage
//! velocities so that particle systems can be advanced in lockstep.

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::velocity::Velocity;

/// Stage time offsets of classical RK4, in units of `dt`.
pub const RK4_NODES: [f64; 4] = [0.0, 0.5, 0.5, 1.0];

/// Right-hand side of a vorticity system at one state.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub rhs: SpectralField,
    /// Velocity of the state (the field particles follow).
    pub velocity: Velocity,
    /// Grid maxima of the transport speed along `x1` and `x2`, for the CFL bound.
    pub speed: (f64, f64),
}

/// A vorticity evolution `d omega/dt = F(omega)`.
pub trait Dynamics {
    fn evaluate(&self, omega: &SpectralField) -> Result<Evaluation>;
}

/// Directional CFL bound `c / (s1/dx1 + s2/dx2)`, with speeds floored at 1e-12.
pub fn cfl_bound(grid: &crate::grid::TorusGrid, speed: (f64, f64), c: f64) -> f64 {
    let rate = speed.0 / grid.dx1() + speed.1 / grid.dx2();
    let floor = 1e-12 / grid.dx1().min(grid.dx2());
    c / rate.max(floor)
}

/// Grid maxima of `|u1|` and `|u2|`.
pub fn max_speeds(velocity: &Velocity) -> (f64, f64) {
    let max_abs = |f: &SpectralField| f.to_values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    (max_abs(&velocity.u1), max_abs(&velocity.u2))
}

/// Directional CFL bound of a velocity field.
pub fn cfl_from_velocity(velocity: &Velocity, c: f64) -> f64 {
    cfl_bound(velocity.u1.grid(), max_speeds(velocity), c)
}

/// Velocities at the four RK4 stages of one step starting at `t0`.
#[derive(Debug, Clone)]
pub struct StageFields {
    pub t0: f64,
    pub dt: f64,
    pub velocities: [Velocity; 4],
}

/// Source of velocity fields at RK4 stage times.
pub trait VelocityProvider {
    fn velocity(&self, stage: usize, t: f64) -> Result<&Velocity>;
}

impl StageFields {
    pub fn stage_time(&self, stage: usize) -> f64 {
        self.t0 + RK4_NODES[stage] * self.dt
    }
}

impl VelocityProvider for StageFields {
    fn velocity(&self, stage: usize, t: f64) -> Result<&Velocity> {
        let available = self.stage_time(stage.min(3));
        if stage > 3 || (t - available).abs() > 1e-12 * available.abs().max(1.0) {
            return Err(Error::Sync {
                stage,
                requested: t,
                available,
            });
        }
        Ok(&self.velocities[stage])
    }
}

/// A velocity that does not change in time.
#[derive(Debug, Clone)]
pub struct SteadyVelocity(pub Velocity);

impl VelocityProvider for SteadyVelocity {
    fn velocity(&self, _stage: usize, _t: f64) -> Result<&Velocity> {
        Ok(&self.0)
    }
}

/// One RK4 step; fails if `dt` exceeds the CFL bound of the initial state.
pub fn rk4_step<D: Dynamics + ?Sized>(
    dynamics: &D,
    omega: &SpectralField,
    t: f64,
    dt: f64,
    cfl: f64,
) -> Result<(SpectralField, StageFields)> {
    let first = dynamics.evaluate(omega)?;
    rk4_step_from(dynamics, omega, first, t, dt, cfl)
}

/// RK4 step reusing an already computed first stage.
pub fn rk4_step_from<D: Dynamics + ?Sized>(
    dynamics: &D,
    omega: &SpectralField,
    first: Evaluation,
    t: f64,
    dt: f64,
    cfl: f64,
) -> Result<(SpectralField, StageFields)> {
    if !(dt > 0.0) {
        return Err(Error::Validation(format!(
            "time step {dt} must be positive"
        )));
    }
    let bound = cfl_bound(omega.grid(), first.speed, cfl);
    if dt > bound * (1.0 + 1e-12) {
        return Err(Error::StepSize { dt, bound });
    }
    let Evaluation {
        rhs: k1,
        velocity: v1,
        ..
    } = first;
    let mut w = omega.clone();
    w.axpy(0.5 * dt, &k1);
    let Evaluation {
        rhs: k2,
        velocity: v2,
        ..
    } = dynamics.evaluate(&w)?;
    let mut w = omega.clone();
    w.axpy(0.5 * dt, &k2);
    let Evaluation {
        rhs: k3,
        velocity: v3,
        ..
    } = dynamics.evaluate(&w)?;
    let mut w = omega.clone();
    w.axpy(dt, &k3);
    let Evaluation {
        rhs: k4,
        velocity: v4,
        ..
    } = dynamics.evaluate(&w)?;
    let mut next = omega.clone();
    next.axpy(dt / 6.0, &k1);
    next.axpy(dt / 3.0, &k2);
    next.axpy(dt / 3.0, &k3);
    next.axpy(dt / 6.0, &k4);
    next.enforce_hermitian();
    Ok((
        next,
        StageFields {
            t0: t,
            dt,
            velocities: [v1, v2, v3, v4],
        },
    ))
}

/// How `integrate` chooses step sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStepping {
    /// Largest CFL-admissible step with factor `cfl`, capped at `dt_max`.
    Cfl { cfl: f64, dt_max: f64 },
    /// A fixed step (still checked against the CFL bound with factor `cfl`).
    Fixed { dt: f64, cfl: f64 },
}

impl TimeStepping {
    pub fn cfl(&self) -> f64 {
        match *self {
            TimeStepping::Cfl { cfl, .. } | TimeStepping::Fixed { cfl, .. } => cfl,
        }
    }
}

impl Default for TimeStepping {
    fn default() -> Self {
        TimeStepping::Cfl {
            cfl: 0.5,
            dt_max: 0.05,
        }
    }
}

/// Advances `omega` from `t0` through the sorted `sample_times`, landing on each
/// exactly by shortening the last step before it. `on_step` sees the stage
/// velocities of every step; `on_sample` sees the state at each sample time
/// (including `t0` if listed).
pub fn integrate<D, S, O>(
    dynamics: &D,
    omega0: &SpectralField,
    t0: f64,
    sample_times: &[f64],
    policy: TimeStepping,
    mut on_step: S,
    mut on_sample: O,
) -> Result<SpectralField>
where
    D: Dynamics + ?Sized,
    S: FnMut(&StageFields) -> Result<()>,
    O: FnMut(f64, &SpectralField) -> Result<()>,
{
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Validation("sample times must be sorted".into()));
    }
    if sample_times.first().is_some_and(|&s| s < t0) {
        return Err(Error::Validation(
            "sample times must not precede the start time".into(),
        ));
    }
    let mut omega = omega0.clone();
    let mut t = t0;
    for &target in sample_times {
        while target - t > 1e-12 * target.abs().max(1.0) {
            let remaining = target - t;
            let first = dynamics.evaluate(&omega)?;
            let dt_nominal = match policy {
                TimeStepping::Fixed { dt, .. } => dt,
                TimeStepping::Cfl { cfl, dt_max } => {
                    cfl_bound(omega.grid(), first.speed, cfl).min(dt_max)
                }
            };
            // Take the remainder when it is within a hair of one step.
            let dt = if remaining <= dt_nominal * (1.0 + 1e-9) {
                remaining
            } else {
                dt_nominal
            };
            let (next, stages) = rk4_step_from(dynamics, &omega, first, t, dt, policy.cfl())?;
            if !next.is_finite() {
                return Err(Error::BlowUp { last_valid_t: t });
            }
            on_step(&stages)?;
            omega = next;
            t = if dt == remaining { target } else { t + dt };
        }
        on_sample(target, &omega)?;
    }
    Ok(omega)
}
