//! Euler linearized about a stationary shear `(f(x2), 0)`:
//! `d omega'/dt = -f d1 omega' - u2' d2 omega_inf`, where `d2 omega_inf = -f''`.
//!
//! The base enters through its discrete velocity and vorticity gradient, so the
//! scheme is the exact linearization of the pseudo-spectral nonlinear one. Since
//! the base does not depend on `x1`, each `k1` column evolves on its own and the
//! products are formed with one-dimensional transforms along `x2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Axis, SpectralField};
use crate::grid::TorusGrid;
use crate::profile::ShearProfile;
use crate::stepping::{self, Dynamics, Evaluation, StageFields, TimeStepping};
use crate::velocity::{velocity_from_vorticity, Velocity};

/// Linearized dynamics about a shear base state.
#[derive(Debug, Clone)]
pub struct LinearizedEuler {
    grid: TorusGrid,
    /// Base velocity `f` at the grid rows `x2_j` (mean included).
    f: Vec<f64>,
    /// `d2 omega_inf` at the grid rows.
    dw: Vec<f64>,
    fmax: f64,
}

impl LinearizedEuler {
    /// Linearization about the discrete shear state of `profile` on `grid`.
    pub fn new(profile: &ShearProfile, grid: &TorusGrid) -> Result<Self> {
        let (omega, mean) = profile.vorticity(grid)?;
        Self::from_base(&omega, mean)
    }

    /// Linearization about an `x1`-independent base vorticity with mean velocity `mean`.
    pub fn from_base(omega: &SpectralField, mean: (f64, f64)) -> Result<Self> {
        let g = omega.grid().clone();
        let n2 = g.n2();
        if omega.coeffs()[n2..].iter().any(|c| c.norm_sqr() > 0.0) {
            return Err(Error::Validation(
                "base vorticity must not depend on x1".into(),
            ));
        }
        if mean.1 != 0.0 {
            return Err(Error::Validation(
                "a shear base state has no x2 mean velocity".into(),
            ));
        }
        let u = velocity_from_vorticity(omega, mean)?;
        let column = |field: &SpectralField| -> Vec<f64> {
            let vals = field.to_values();
            (0..n2).map(|j| vals[j * g.n1()]).collect()
        };
        let f = column(&u.u1);
        let dw = column(&omega.derivative(Axis::X2));
        let fmax = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Ok(Self {
            grid: g,
            f,
            dw,
            fmax,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Base velocity at the grid rows.
    pub fn base_velocity(&self) -> &[f64] {
        &self.f
    }

    /// `-f d1 w - u2(w) d2 omega_inf`, dealiased.
    pub fn rhs(&self, w: &SpectralField) -> Result<SpectralField> {
        if *w.grid() != self.grid {
            return Err(Error::Validation(
                "perturbation lives on a different grid".into(),
            ));
        }
        let g = &self.grid;
        let n2 = g.n2();
        let inv_lap = g.inv_lap();
        let plans = &g.plans;
        let mut out = vec![Complex64::default(); g.spectral_len()];
        let mut a = vec![Complex64::default(); n2];
        let mut b = vec![Complex64::default(); n2];
        let mut scratch = vec![
            Complex64::default();
            plans
                .inv2
                .get_inplace_scratch_len()
                .max(plans.fwd2.get_inplace_scratch_len())
        ];
        let scale = 1.0 / n2 as f64;
        // Column 0 has k1 = 0 and no dynamics.
        for i1 in 1..g.retained_columns() {
            let col = &w.coeffs()[i1 * n2..(i1 + 1) * n2];
            if col.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
                continue;
            }
            let k1 = g.k1(i1);
            for i2 in 0..n2 {
                let c = col[i2];
                // d1 w and u2 = d1 psi = -i k1 w / |k|^2
                a[i2] = Complex64::new(-k1 * c.im, k1 * c.re);
                b[i2] = -a[i2] * inv_lap[i1 * n2 + i2];
            }
            plans.inv2.process_with_scratch(&mut a, &mut scratch);
            plans.inv2.process_with_scratch(&mut b, &mut scratch);
            for j in 0..n2 {
                a[j] = -(a[j] * self.f[j] + b[j] * self.dw[j]) * scale;
            }
            plans.fwd2.process_with_scratch(&mut a, &mut scratch);
            let dst = &mut out[i1 * n2..(i1 + 1) * n2];
            for i2 in 0..n2 {
                if g.retained(i1, i2) {
                    dst[i2] = a[i2];
                }
            }
        }
        SpectralField::from_coeffs(g, out)
    }
}

impl Dynamics for LinearizedEuler {
    fn evaluate(&self, omega: &SpectralField) -> Result<Evaluation> {
        Ok(Evaluation {
            rhs: self.rhs(omega)?,
            velocity: velocity_from_vorticity(omega, (0.0, 0.0))?,
            speed: (self.fmax, 0.0),
        })
    }
}

/// Perturbation vorticity at a time.
#[derive(Debug, Clone)]
pub struct LinearState {
    pub omega_prime: SpectralField,
    pub t: f64,
}

impl LinearState {
    pub fn new(omega_prime: SpectralField) -> Result<Self> {
        velocity_from_vorticity(&omega_prime, (0.0, 0.0))?;
        let mut omega_prime = omega_prime.dealias();
        omega_prime.coeffs_mut()[0] = Default::default();
        omega_prime.enforce_hermitian();
        Ok(Self {
            omega_prime,
            t: 0.0,
        })
    }

    pub fn velocity(&self) -> Result<Velocity> {
        velocity_from_vorticity(&self.omega_prime, (0.0, 0.0))
    }
}

/// One sample of a linearized run: the state and `(||u1'||, ||u2'||)`.
#[derive(Debug, Clone)]
pub struct LinearSample {
    pub state: LinearState,
    pub norms: (f64, f64),
}

/// Integrates the linearized system through `sample_times`.
pub fn run_linear(
    system: &LinearizedEuler,
    s0: &LinearState,
    sample_times: &[f64],
    policy: TimeStepping,
) -> Result<Vec<LinearSample>> {
    run_linear_with(system, s0, sample_times, policy, |_| Ok(()))
}

/// Like [`run_linear`], calling `on_step` with the perturbation velocity at every RK4 stage.
pub fn run_linear_with<S>(
    system: &LinearizedEuler,
    s0: &LinearState,
    sample_times: &[f64],
    policy: TimeStepping,
    on_step: S,
) -> Result<Vec<LinearSample>>
where
    S: FnMut(&StageFields) -> Result<()>,
{
    let mut out = Vec::with_capacity(sample_times.len());
    stepping::integrate(
        system,
        &s0.omega_prime,
        s0.t,
        sample_times,
        policy,
        on_step,
        |t, omega| {
            let u = velocity_from_vorticity(omega, (0.0, 0.0))?;
            out.push(LinearSample {
                state: LinearState {
                    omega_prime: omega.clone(),
                    t,
                },
                norms: (u.u1.l2_norm(), u.u2.l2_norm()),
            });
            Ok(())
        },
    )?;
    Ok(out)
}

/// `||u2'(t)|| / ||u2'(0)||` for a plane wave with wavenumber `(k1, k2)` sheared by `f = x2`.
pub fn orr_oracle(k1: f64, k2: f64, t: f64) -> Result<f64> {
    if k1 == 0.0 {
        return Err(Error::Validation("the Orr ratio needs k1 != 0".into()));
    }
    Ok((k1 * k1 + k2 * k2) / (k1 * k1 + (k2 + t * k1).powi(2)))
}

/// `omega0(x1 - t f(x2), x2)`: the exact linear evolution where `f'' = 0` on the support.
pub fn transported_vorticity<'a>(
    omega0: impl Fn(f64, f64) -> f64 + 'a,
    profile: &'a ShearProfile,
    t: f64,
) -> impl Fn(f64, f64) -> f64 + 'a {
    move |x1, x2| omega0(x1 - t * profile.f(x2), x2)
}

/// Initial perturbation given by the streamfunction
/// `psi = A b((x2 - c)/w) cos(pi k x1)` with `b(s) = exp(-1/(1 - s^2))` on `|s| < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialPerturbation {
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one_u32")]
    pub k: u32,
    #[serde(default)]
    pub center: f64,
    #[serde(default = "one")]
    pub width: f64,
    /// If set, `amplitude` is replaced so that `||U_in||` equals this value on the grid.
    #[serde(default)]
    pub norm: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn one_u32() -> u32 {
    1
}

impl Default for InitialPerturbation {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            k: 1,
            center: 0.0,
            width: 1.0,
            norm: Some(1.0),
        }
    }
}

/// `exp(-1/(1 - s^2))` on `|s| < 1`, zero outside.
pub fn bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

impl InitialPerturbation {
    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.width > 0.0) {
            return Err(Error::config("u_in.width", "must be positive"));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::config("u_in.amplitude", "must be finite"));
        }
        if let Some(n) = self.norm {
            if !(n >= 0.0) || !n.is_finite() {
                return Err(Error::config("u_in.norm", "must be a nonnegative number"));
            }
        }
        let half = m as f64;
        if self.center.abs() + self.width > half {
            return Err(Error::config(
                "u_in",
                format!(
                    "support |x2 - {}| < {} does not fit in the box of half-height {half}",
                    self.center, self.width
                ),
            ));
        }
        Ok(())
    }

    /// Streamfunction at amplitude `a`.
    fn psi(&self, grid: &TorusGrid, a: f64) -> SpectralField {
        let (c, w, k) = (self.center, self.width, self.k as f64);
        let p2 = grid.period2();
        SpectralField::from_fn(grid, move |x1, x2| {
            // Nearest periodic image of x2 to the centre.
            let y = (x2 - c + 0.5 * p2).rem_euclid(p2) - 0.5 * p2;
            a * bump(y / w) * (std::f64::consts::PI * k * x1).cos()
        })
    }

    /// Vorticity of `U_in` (dealiased, zero mean) and its velocity.
    pub fn build(&self, grid: &TorusGrid) -> Result<(SpectralField, Velocity)> {
        self.validate(grid.m())?;
        let make = |a: f64| -> Result<(SpectralField, Velocity)> {
            let mut w = self.psi(grid, a).laplacian().dealias();
            w.coeffs_mut()[0] = Default::default();
            w.enforce_hermitian();
            let u = velocity_from_vorticity(&w, (0.0, 0.0))?;
            Ok((w, u))
        };
        match self.norm {
            None => make(self.amplitude),
            Some(target) => {
                let (w, u) = make(1.0)?;
                let n = u.l2_norm();
                if n == 0.0 {
                    return Err(Error::config("u_in", "perturbation vanishes on this grid"));
                }
                let s = target / n;
                Ok((
                    w.scaled(s),
                    Velocity {
                        u1: u.u1.scaled(s),
                        u2: u.u2.scaled(s),
                    },
                ))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileSpec;
    use std::f64::consts::PI;

    fn couette(m: usize) -> (TorusGrid, ShearProfile) {
        let g = TorusGrid::new(32, 128 * m, m).unwrap();
        let p = ShearProfile::new(ProfileSpec::SmoothedCouette { delta: 0.2 }, m).unwrap();
        (g, p)
    }

    fn packet(x1: f64, x2: f64) -> f64 {
        (-(x2 * x2) / 0.08).exp() * (2.0 * PI * x1 + 3.0 * PI * x2).cos()
    }

    /// `packet` centred at `x2 = 0` on the `m = 4` box.
    fn periodic_packet(x1: f64, x2: f64) -> f64 {
        packet(x1, if x2 >= 4.0 { x2 - 8.0 } else { x2 })
    }

    #[test]
    fn x1_independent_perturbation_is_steady() {
        let (g, p) = couette(4);
        let lin = LinearizedEuler::new(&p, &g).unwrap();
        let w = SpectralField::from_fn(&g, |_, x2| (PI * x2 / 4.0).sin());
        assert_eq!(lin.rhs(&w).unwrap().max_abs_coeff(), 0.0);
    }

    #[test]
    fn kolmogorov_three_term_stencil() {
        let g = TorusGrid::new(16, 32, 1).unwrap();
        let amp = 0.7;
        let p = ShearProfile::new(
            ProfileSpec::Kolmogorov {
                amplitude: amp,
                wavenumber: 1.0,
            },
            1,
        )
        .unwrap();
        let lin = LinearizedEuler::new(&p, &g).unwrap();
        let (j1, j2) = (2i64, 3i64);
        let (k1, k2) = (PI * j1 as f64, PI * j2 as f64);
        let w = SpectralField::from_fn(&g, |x1, x2| (k1 * x1 + k2 * x2).cos());
        let r = lin.rhs(&w).unwrap();
        // Hand assembly with f = A sin(pi x2), f'' = -pi^2 f, u2 = i k1 psi, psi = -w/|k|^2.
        let kk = k1 * k1 + k2 * k2;
        let up = -amp * k1 / 4.0 + PI * PI * amp * k1 / (4.0 * kk);
        let down = -up;
        let got_up = r.coeff(j1, j2 + 1);
        let got_down = r.coeff(j1, j2 - 1);
        assert!(
            (got_up - Complex64::new(up, 0.0)).norm() < 1e-13,
            "{got_up}"
        );
        assert!(
            (got_down - Complex64::new(down, 0.0)).norm() < 1e-13,
            "{got_down}"
        );
        let others = r.max_abs_coeff();
        assert!((others - up.abs()).abs() < 1e-13);
    }

    #[test]
    fn linear_region_is_pure_transport() {
        let (g, p) = couette(4);
        let lin = LinearizedEuler::new(&p, &g).unwrap();
        let w = SpectralField::from_fn(&g, periodic_packet);
        let r = lin.rhs(&w.dealias()).unwrap().to_values();
        let (mut inner, mut outer) = (0.0f64, 0.0f64);
        for j in 0..g.n2() {
            let y = if g.x2(j) >= 4.0 {
                g.x2(j) - 8.0
            } else {
                g.x2(j)
            };
            for i in 0..g.n1() {
                let x1 = g.x1(i);
                let d1 = -2.0 * PI * (-(y * y) / 0.08).exp() * (2.0 * PI * x1 + 3.0 * PI * y).sin();
                let err = (r[j * g.n1() + i] + p.f(y) * d1).abs();
                if y.abs() <= 1.5 {
                    inner = inner.max(err);
                } else {
                    outer = outer.max(err);
                }
            }
        }
        // Where f'' = 0 the rhs is pure transport; at the turnarounds the induced
        // u2' (nonlocal, ~exp(-|k1| distance)) meets f'' != 0.
        assert!(inner < 1e-10, "{inner}");
        assert!(outer < 1e-4, "{outer}");
    }

    #[test]
    fn matches_two_dimensional_linearization() {
        // -D(u_inf . grad w + u(w) . grad omega_inf) with full 2-D transforms.
        let g = TorusGrid::new(16, 64, 2).unwrap();
        let p = ShearProfile::new(ProfileSpec::TanhShear { steepness: 1.5 }, 2).unwrap();
        let (base, mean) = p.vorticity(&g).unwrap();
        let lin = LinearizedEuler::from_base(&base, mean).unwrap();
        let mut w = crate::field::tests::random_smooth(&g, 21, 4);
        w.coeffs_mut()[0] = Default::default();
        let ub = velocity_from_vorticity(&base, mean).unwrap();
        let uw = velocity_from_vorticity(&w, (0.0, 0.0)).unwrap();
        let (a, _) = crate::euler::advection(&ub, &w).unwrap();
        let (b, _) = crate::euler::advection(&uw, &base).unwrap();
        let diff = lin.rhs(&w).unwrap().sub(&a.add(&b)).max_abs_coeff();
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn linearity_is_exact() {
        let (g, p) = couette(4);
        let lin = LinearizedEuler::new(&p, &g).unwrap();
        let s = LinearState::new(SpectralField::from_fn(&g, periodic_packet)).unwrap();
        let s2 = LinearState::new(s.omega_prime.scaled(2.0)).unwrap();
        let policy = TimeStepping::Fixed { dt: 0.01, cfl: 0.5 };
        let a = run_linear(&lin, &s, &[0.3], policy).unwrap();
        let b = run_linear(&lin, &s2, &[0.3], policy).unwrap();
        let d = b[0]
            .state
            .omega_prime
            .sub(&a[0].state.omega_prime.scaled(2.0))
            .max_abs_coeff();
        assert_eq!(d, 0.0);
        assert_eq!(b[0].norms.1, 2.0 * a[0].norms.1);
    }

    #[test]
    fn transport_conserves_vorticity_norm_and_matches_oracle() {
        let (g, p) = couette(4);
        let lin = LinearizedEuler::new(&p, &g).unwrap();
        let s = LinearState::new(SpectralField::from_fn(&g, periodic_packet)).unwrap();
        let n0 = s.omega_prime.l2_norm();
        let out = run_linear(&lin, &s, &[0.5, 1.0], TimeStepping::default()).unwrap();
        let exact = transported_vorticity(packet, &p, 1.0);
        let e = SpectralField::from_fn(&g, |x1, x2| {
            let y = if x2 > 4.0 { x2 - 8.0 } else { x2 };
            exact(x1, y)
        });
        let last = &out[1].state.omega_prime;
        assert!(((last.l2_norm() - n0) / n0).abs() < 1e-10);
        assert!(last.sub(&e).l2_norm() / n0 < 1e-4);
    }

    #[test]
    fn orr_ratio_values() {
        assert_eq!(orr_oracle(PI, PI, 0.0).unwrap(), 1.0);
        assert!((orr_oracle(PI, PI, 3.0).unwrap() - 2.0 / 17.0).abs() < 1e-15);
        assert!(orr_oracle(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_data_stays_zero() {
        let (g, p) = couette(4);
        let lin = LinearizedEuler::new(&p, &g).unwrap();
        let s = LinearState::new(SpectralField::zeros(&g)).unwrap();
        let out = run_linear(&lin, &s, &[0.1, 0.2], TimeStepping::default()).unwrap();
        assert!(out.iter().all(|o| o.norms == (0.0, 0.0)));
    }

    #[test]
    fn initial_perturbation_is_normalized_and_m_independent() {
        let u_in = InitialPerturbation::default();
        let mut vals = Vec::new();
        for m in [4usize, 8] {
            let g = TorusGrid::new(32, 128 * m, m).unwrap();
            let (w, u) = u_in.build(&g).unwrap();
            assert!((u.l2_norm() - 1.0).abs() < 1e-12);
            assert!(u.divergence_residual() < 1e-12);
            assert!(u.curl().sub(&w).max_abs_coeff() < 1e-12);
            let raw = InitialPerturbation {
                norm: None,
                ..u_in.clone()
            };
            vals.push(raw.build(&g).unwrap().1.l2_norm());
        }
        assert!(((vals[0] - vals[1]) / vals[0]).abs() < 1e-6, "{vals:?}");
    }

    #[test]
    fn oversized_support_is_rejected() {
        let u_in = InitialPerturbation {
            center: 1.5,
            width: 1.0,
            ..Default::default()
        };
        let g = TorusGrid::new(16, 32, 2).unwrap();
        assert!(u_in.build(&g).unwrap_err().to_string().contains("u_in"));
    }
}
