//! Biot–Savart inversion on the torus.
//!
//! Conventions: `omega = d1 u2 - d2 u1`, `u = (-d2 psi, d1 psi)`, `omega = lap psi`.
//! The mean velocity is not determined by the vorticity and is carried separately.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{vector_l2_norm, Axis, SpectralField};

/// Velocity components as spectral fields.
#[derive(Debug, Clone)]
pub struct Velocity {
    pub u1: SpectralField,
    pub u2: SpectralField,
}

impl Velocity {
    pub fn l2_norm(&self) -> f64 {
        vector_l2_norm(&self.u1, &self.u2)
    }

    /// Spectral divergence residual `max |k1 u1 + k2 u2|` over modes.
    pub fn divergence_residual(&self) -> f64 {
        let g = self.u1.grid();
        let n2 = g.n2();
        let (a, b) = (self.u1.coeffs(), self.u2.coeffs());
        let mut worst = 0.0f64;
        for i1 in 0..g.nh() {
            for i2 in 0..n2 {
                let s = a[i1 * n2 + i2] * g.k1(i1) + b[i1 * n2 + i2] * g.k2(i2);
                worst = worst.max(s.norm());
            }
        }
        worst
    }

    /// Scalar curl `d1 u2 - d2 u1`.
    pub fn curl(&self) -> SpectralField {
        self.u2
            .derivative(Axis::X1)
            .sub(&self.u1.derivative(Axis::X2))
    }

    pub fn mean(&self) -> (f64, f64) {
        (self.u1.mean().re, self.u2.mean().re)
    }
}

/// Relative size of the `(0,0)` vorticity mode tolerated as round-off.
const MEAN_VORTICITY_TOL: f64 = 1e-10;

/// Velocity of a vorticity field plus a prescribed mean velocity.
pub fn velocity_from_vorticity(omega: &SpectralField, mean: (f64, f64)) -> Result<Velocity> {
    let g = omega.grid();
    let c00 = omega.mean().norm();
    if c00 > MEAN_VORTICITY_TOL * omega.max_abs_coeff().max(1.0) {
        return Err(Error::Validation(format!(
            "vorticity has nonzero mean {c00:.3e}; a curl on the torus has zero mean"
        )));
    }
    let n2 = g.n2();
    let w = omega.coeffs();
    let inv_lap = g.inv_lap();
    let k2s: Vec<f64> = (0..n2)
        .map(|i2| if i2 == n2 / 2 { 0.0 } else { g.k2(i2) })
        .collect();
    let mut u1 = vec![Complex64::default(); w.len()];
    let mut u2 = vec![Complex64::default(); w.len()];
    for i1 in 0..g.nh() {
        // Odd-order derivatives drop the Nyquist modes.
        let k1 = if i1 == g.n1() / 2 { 0.0 } else { g.k1(i1) };
        let base = i1 * n2;
        for i2 in 0..n2 {
            let psi = -w[base + i2] * inv_lap[base + i2];
            u1[base + i2] = Complex64::new(psi.im * k2s[i2], -psi.re * k2s[i2]);
            u2[base + i2] = Complex64::new(-psi.im * k1, psi.re * k1);
        }
    }
    u1[0] = Complex64::new(mean.0, 0.0);
    u2[0] = Complex64::new(mean.1, 0.0);
    Ok(Velocity {
        u1: SpectralField::from_coeffs(g, u1)?,
        u2: SpectralField::from_coeffs(g, u2)?,
    })
}

/// Streamfunction of a zero-mean vorticity field (`psi` has zero mean).
pub fn streamfunction(omega: &SpectralField) -> SpectralField {
    let g = omega.grid();
    let n2 = g.n2();
    let mut out = omega.clone();
    for i1 in 0..g.nh() {
        let k1 = g.k1(i1);
        for i2 in 0..n2 {
            let k2 = g.k2(i2);
            let c = &mut out.coeffs_mut()[i1 * n2 + i2];
            *c = if i1 == 0 && i2 == 0 {
                Complex64::default()
            } else {
                -*c / (k1 * k1 + k2 * k2)
            };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use std::f64::consts::PI;

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn single_mode_inversion() {
        let g = TorusGrid::new(32, 64, 2).unwrap();
        let (k1, k2, amp) = (2.0 * PI, 1.5 * PI, 0.7);
        let omega = SpectralField::from_fn(&g, |x1, x2| amp * (k1 * x1 + k2 * x2).cos());
        let u = velocity_from_vorticity(&omega, (0.0, 0.0)).unwrap();
        let kk = k1 * k1 + k2 * k2;
        let e1 = g.sample(|x1, x2| -amp * k2 / kk * (k1 * x1 + k2 * x2).sin());
        let e2 = g.sample(|x1, x2| amp * k1 / kk * (k1 * x1 + k2 * x2).sin());
        assert!(max_diff(&u.u1.to_values(), &e1) < 1e-13);
        assert!(max_diff(&u.u2.to_values(), &e2) < 1e-13);
    }

    #[test]
    fn shear_is_recovered_from_its_vorticity() {
        let g = TorusGrid::new(16, 64, 1).unwrap();
        let omega = SpectralField::from_fn(&g, |_, x2| -PI * (PI * x2).cos());
        let u = velocity_from_vorticity(&omega, (0.0, 0.0)).unwrap();
        let expect = g.sample(|_, x2| (PI * x2).sin());
        assert!(max_diff(&u.u1.to_values(), &expect) < 1e-13);
        assert!(u.u2.to_values().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn nonzero_mean_vorticity_is_rejected() {
        let g = TorusGrid::new(16, 16, 1).unwrap();
        let omega = SpectralField::from_fn(&g, |x1, _| 1.0 + (PI * x1).cos());
        assert!(matches!(
            velocity_from_vorticity(&omega, (0.0, 0.0)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn mean_is_carried_on_the_zero_mode() {
        let g = TorusGrid::new(16, 16, 1).unwrap();
        let u = velocity_from_vorticity(&SpectralField::zeros(&g), (0.25, -1.0)).unwrap();
        assert_eq!(u.mean(), (0.25, -1.0));
        assert!(u.u1.to_values().iter().all(|v| (v - 0.25).abs() < 1e-15));
    }
}
