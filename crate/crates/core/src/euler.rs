//! Nonlinear Euler in vorticity form, `d omega/dt + u . grad omega = 0`, with the
//! advection term computed pseudo-spectrally and dealiased by the 2/3 rule.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Axis, SpectralField};
use crate::grid::TorusGrid;
use crate::stepping::{self, Dynamics, Evaluation, StageFields, TimeStepping};
use crate::velocity::{velocity_from_vorticity, Velocity};

/// Enstrophy fraction in the outer shell above which a run is flagged as under-resolved.
pub const SHELL_WARN_FRACTION: f64 = 1e-8;

/// Vorticity, mean velocity and time.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub omega: SpectralField,
    pub mean: (f64, f64),
    pub t: f64,
}

impl FlowState {
    /// State at `t = 0`; the vorticity is dealiased and must have zero mean.
    pub fn new(omega: SpectralField, mean: (f64, f64)) -> Result<Self> {
        Self::at_time(omega, mean, 0.0)
    }

    pub fn at_time(omega: SpectralField, mean: (f64, f64), t: f64) -> Result<Self> {
        if !omega.is_finite() {
            return Err(Error::Validation(
                "vorticity has non-finite coefficients".into(),
            ));
        }
        // Validates the mean.
        velocity_from_vorticity(&omega, mean)?;
        let mut omega = omega.dealias();
        omega.coeffs_mut()[0] = Default::default();
        omega.enforce_hermitian();
        Ok(Self { omega, mean, t })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.omega.grid()
    }

    pub fn velocity(&self) -> Result<Velocity> {
        velocity_from_vorticity(&self.omega, self.mean)
    }

    /// The time-reversed state `(-omega, -mean)`.
    pub fn reversed(&self) -> Self {
        Self {
            omega: self.omega.scaled(-1.0),
            mean: (-self.mean.0, -self.mean.1),
            t: self.t,
        }
    }

    pub fn diagnostics(&self) -> Result<Diagnostics> {
        Diagnostics::of(self)
    }
}

/// Conserved and monitoring quantities of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub energy: f64,
    pub enstrophy: f64,
    pub palinstrophy: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub divergence: f64,
    pub shell_fraction: f64,
}

impl Diagnostics {
    pub fn of(state: &FlowState) -> Result<Self> {
        let u = state.velocity()?;
        let w = &state.omega;
        let grad = crate::field::vector_l2_norm(&w.derivative(Axis::X1), &w.derivative(Axis::X2));
        let vals = w.to_values();
        Ok(Self {
            t: state.t,
            energy: 0.5 * u.l2_norm().powi(2),
            enstrophy: 0.5 * w.l2_norm().powi(2),
            palinstrophy: 0.5 * grad * grad,
            omega_min: vals.iter().copied().fold(f64::INFINITY, f64::min),
            omega_max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            divergence: u.divergence_residual(),
            shell_fraction: outer_shell_fraction(w),
        })
    }
}

/// Fraction of enstrophy in the outermost third of the retained modes along either axis.
pub fn outer_shell_fraction(omega: &SpectralField) -> f64 {
    let g = omega.grid();
    let (n1, n2) = (g.n1() as i64, g.n2() as i64);
    let n2u = g.n2();
    let (mut shell, mut total) = (0.0, 0.0);
    for i1 in 0..g.nh() {
        let w = if i1 == 0 || i1 == g.n1() / 2 {
            1.0
        } else {
            2.0
        };
        for i2 in 0..n2u {
            let e = w * omega.coeffs()[i1 * n2u + i2].norm_sqr();
            total += e;
            let (a, b) = (i1 as i64, g.index2(i2).abs());
            if 9 * a > 2 * n1 || 9 * b > 2 * n2 {
                shell += e;
            }
        }
    }
    if total > 0.0 {
        shell / total
    } else {
        0.0
    }
}

/// The nonlinear Euler system with a fixed mean velocity.
#[derive(Debug, Clone, Copy, Default)]
pub struct Euler {
    pub mean: (f64, f64),
}

impl Dynamics for Euler {
    fn evaluate(&self, omega: &SpectralField) -> Result<Evaluation> {
        let u = velocity_from_vorticity(omega, self.mean)?;
        let (rhs, speed) = advection(&u, omega)?;
        Ok(Evaluation {
            rhs,
            velocity: u,
            speed,
        })
    }
}

/// `-dealias(u . grad w)` evaluated pseudo-spectrally, with the grid maxima of `|u1|`, `|u2|`.
pub fn advection(u: &Velocity, w: &SpectralField) -> Result<(SpectralField, (f64, f64))> {
    let g = w.grid();
    let (u1, u2) = (u.u1.to_values(), u.u2.to_values());
    let (d1, d2) = (
        w.derivative(Axis::X1).to_values(),
        w.derivative(Axis::X2).to_values(),
    );
    let mut speed = (0.0f64, 0.0f64);
    let prod: Vec<f64> = (0..g.len())
        .map(|i| {
            speed.0 = speed.0.max(u1[i].abs());
            speed.1 = speed.1.max(u2[i].abs());
            -(u1[i] * d1[i] + u2[i] * d2[i])
        })
        .collect();
    Ok((truncated_forward(g, &prod)?, speed))
}

/// Forward transform followed by the 2/3 truncation and removal of the mean.
pub(crate) fn truncated_forward(g: &TorusGrid, values: &[f64]) -> Result<SpectralField> {
    g.check_physical(values.len())?;
    let coeffs = g.forward_columns(values, g.retained_columns());
    let mut out = SpectralField::from_coeffs(g, coeffs)?;
    out.dealias_in_place();
    out.coeffs_mut()[0] = Default::default();
    Ok(out)
}

/// Right-hand side `-dealias(u . grad omega)` of the vorticity equation.
pub fn rhs(state: &FlowState) -> Result<SpectralField> {
    Euler { mean: state.mean }
        .evaluate(&state.omega)
        .map(|e| e.rhs)
}

/// Directional CFL step `c / (max|u1|/dx1 + max|u2|/dx2)` of a state.
pub fn cfl_dt(state: &FlowState, c: f64) -> Result<f64> {
    Ok(stepping::cfl_from_velocity(&state.velocity()?, c))
}

/// One RK4 step of size `dt`, rejected if it exceeds the CFL bound with factor `cfl`.
pub fn step(state: &FlowState, dt: f64, cfl: f64) -> Result<FlowState> {
    step_with_stages(state, dt, cfl).map(|(s, _)| s)
}

/// One RK4 step, also returning the stage velocities.
pub fn step_with_stages(state: &FlowState, dt: f64, cfl: f64) -> Result<(FlowState, StageFields)> {
    let dynamics = Euler { mean: state.mean };
    let (omega, stages) = stepping::rk4_step(&dynamics, &state.omega, state.t, dt, cfl)?;
    if !omega.is_finite() {
        return Err(Error::BlowUp {
            last_valid_t: state.t,
        });
    }
    Ok((
        FlowState {
            omega,
            mean: state.mean,
            t: state.t + dt,
        },
        stages,
    ))
}

/// Integrates through `sample_times`, returning the state and diagnostics at each.
pub fn run(
    state: &FlowState,
    sample_times: &[f64],
    policy: TimeStepping,
) -> Result<Vec<(FlowState, Diagnostics)>> {
    run_with(state, sample_times, policy, |_| Ok(()))
}

/// Like [`run`], calling `on_step` with the stage velocities of every step.
pub fn run_with<S>(
    state: &FlowState,
    sample_times: &[f64],
    policy: TimeStepping,
    on_step: S,
) -> Result<Vec<(FlowState, Diagnostics)>>
where
    S: FnMut(&StageFields) -> Result<()>,
{
    let dynamics = Euler { mean: state.mean };
    let mut out = Vec::with_capacity(sample_times.len());
    let mut warned = false;
    stepping::integrate(
        &dynamics,
        &state.omega,
        state.t,
        sample_times,
        policy,
        on_step,
        |t, omega| {
            let s = FlowState {
                omega: omega.clone(),
                mean: state.mean,
                t,
            };
            let d = s.diagnostics()?;
            if !warned && d.shell_fraction > SHELL_WARN_FRACTION {
                warn!(
                    "outer spectral shell holds {:.2e} of enstrophy at t = {t}; resolution may be insufficient",
                    d.shell_fraction
                );
                warned = true;
            }
            out.push((s, d));
            Ok(())
        },
    )?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn random_smooth(g: &TorusGrid, seed: u64, kmax: i64) -> SpectralField {
        let mut w = crate::field::tests::random_smooth(g, seed, kmax);
        w.coeffs_mut()[0] = Default::default();
        w
    }

    fn grid() -> TorusGrid {
        TorusGrid::new(32, 32, 1).unwrap()
    }

    #[test]
    fn single_mode_is_stationary() {
        let g = grid();
        let w = SpectralField::from_fn(&g, |x1, x2| (PI * x1 + 2.0 * PI * x2).cos());
        let s = FlowState::new(w, (0.0, 0.0)).unwrap();
        assert!(rhs(&s).unwrap().max_abs_coeff() < 1e-13);
    }

    #[test]
    fn mean_flow_translates_vorticity() {
        let g = grid();
        let (c1, c2) = (0.3, -0.2);
        // Modes on one |k| shell form a steady solution, so only the mean moves them.
        let shape = |x1: f64, x2: f64| {
            (PI * x1 + 2.0 * PI * x2).sin() + 0.5 * (2.0 * PI * x1 - PI * x2).cos()
        };
        let s = FlowState::new(SpectralField::from_fn(&g, shape), (c1, c2)).unwrap();
        let t_end = 0.5;
        let runs = run(
            &s,
            &[t_end],
            TimeStepping::Cfl {
                cfl: 0.4,
                dt_max: 0.01,
            },
        )
        .unwrap();
        let got = runs[0].0.omega.to_values();
        let expect = g.sample(|x1, x2| shape(x1 - c1 * t_end, x2 - c2 * t_end));
        let err = got
            .iter()
            .zip(&expect)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn rhs_matches_direct_product() {
        let g = TorusGrid::new(48, 48, 1).unwrap();
        let w = random_smooth(&g, 3, 5);
        let s = FlowState::new(w.clone(), (0.1, 0.0)).unwrap();
        let u = s.velocity().unwrap();
        let fine = TorusGrid::new(96, 96, 1).unwrap();
        // Oracle: evaluate the product on a grid fine enough to be alias-free.
        let lift = |f: &SpectralField| {
            let mut c = SpectralField::zeros(&fine);
            for i1 in 0..g.nh() - 1 {
                for i2 in 0..g.n2() {
                    let k = g.index2(i2);
                    if k.abs() < g.n2() as i64 / 2 {
                        c.set_coeff(i1, k, f.coeffs()[i1 * g.n2() + i2]);
                    }
                }
            }
            c.to_values()
        };
        let (u1, u2) = (lift(&u.u1), lift(&u.u2));
        let (d1, d2) = (lift(&w.derivative(Axis::X1)), lift(&w.derivative(Axis::X2)));
        let prod: Vec<f64> = (0..fine.len())
            .map(|i| -(u1[i] * d1[i] + u2[i] * d2[i]))
            .collect();
        let exact = SpectralField::from_values(&fine, &prod).unwrap();
        let r = rhs(&s).unwrap();
        for i1 in 0..g.nh() {
            for i2 in 0..g.n2() {
                if g.retained(i1, i2) {
                    let k = g.index2(i2);
                    let d = (r.coeff(i1 as i64, k) - exact.coeff(i1 as i64, k)).norm();
                    assert!(d < 1e-12, "mode ({i1},{k}): {d}");
                }
            }
        }
    }

    #[test]
    fn energy_and_enstrophy_are_conserved() {
        let g = grid();
        let s = FlowState::new(random_smooth(&g, 11, 4), (0.0, 0.0)).unwrap();
        let d0 = s.diagnostics().unwrap();
        let runs = run(
            &s,
            &[0.5, 1.0],
            TimeStepping::Cfl {
                cfl: 0.3,
                dt_max: 0.01,
            },
        )
        .unwrap();
        let d1 = runs[1].1;
        assert!(((d1.energy - d0.energy) / d0.energy).abs() < 1e-6);
        assert!(((d1.enstrophy - d0.enstrophy) / d0.enstrophy).abs() < 1e-4);
    }

    #[test]
    fn time_reversal_returns_to_start() {
        let g = grid();
        let s = FlowState::new(random_smooth(&g, 5, 3), (0.05, 0.0)).unwrap();
        let policy = TimeStepping::Fixed {
            dt: 0.005,
            cfl: 0.9,
        };
        let fwd = run(&s, &[0.2], policy).unwrap().pop().unwrap().0;
        let back = run(&fwd.reversed(), &[0.4], policy)
            .unwrap()
            .pop()
            .unwrap()
            .0;
        let diff = back.reversed().omega.sub(&s.omega).l2_norm() / s.omega.l2_norm();
        assert!(diff < 1e-7, "{diff}");
    }

    #[test]
    fn oversized_step_is_rejected() {
        let g = grid();
        let s = FlowState::new(random_smooth(&g, 2, 3), (0.0, 0.0)).unwrap();
        let bound = cfl_dt(&s, 0.5).unwrap();
        assert!(matches!(
            step(&s, 2.0 * bound, 0.5),
            Err(Error::StepSize { .. })
        ));
        assert!(step(&s, 0.5 * bound, 0.5).is_ok());
    }

    #[test]
    fn samples_land_exactly() {
        let g = grid();
        let s = FlowState::new(random_smooth(&g, 8, 3), (0.0, 0.0)).unwrap();
        let times = [0.0, 0.013, 0.1, 0.1, 0.25];
        let runs = run(&s, &times, TimeStepping::default()).unwrap();
        let got: Vec<f64> = runs
            .iter()
            .map(|(s, d)| {
                assert_eq!(s.t, d.t);
                s.t
            })
            .collect();
        assert_eq!(got, times);
    }

    #[test]
    fn step_stages_are_synchronised() {
        use crate::stepping::VelocityProvider;
        let g = grid();
        let s = FlowState::new(random_smooth(&g, 4, 3), (0.0, 0.0)).unwrap();
        let (_, st) = step_with_stages(&s, 0.01, 0.9).unwrap();
        assert!(st.velocity(1, 0.005).is_ok());
        assert!(matches!(st.velocity(3, 0.005), Err(Error::Sync { .. })));
        let u0 = s.velocity().unwrap();
        assert!(st.velocities[0].u1.sub(&u0.u1).max_abs_coeff() == 0.0);
    }
}
