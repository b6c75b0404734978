//! The anisotropic periodic box `(R/2Z) x (R/2mZ)` and its FFT plans.
//!
//! Physical arrays are stored row-major with `x1` varying fastest:
//! `values[j * n1 + i]` is the sample at `(i * dx1, j * dx2)`.
//!
//! Spectral arrays hold the half spectrum `k1 >= 0` (the field is real) with
//! `k2` contiguous: `coeffs[i1 * n2 + i2]` for `i1 in 0..=n1/2`, `i2 in 0..n2`
//! in FFT order. Coefficients are Fourier-series coefficients, so the inverse
//! transform is the plain sum `f(x) = sum_k c_k exp(i k.x)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Rows handled together by the transposes between the two transform passes.
const BLOCK: usize = 16;

pub(crate) struct Plans {
    pub r2c: Arc<dyn RealToComplex<f64>>,
    pub c2r: Arc<dyn ComplexToReal<f64>>,
    pub fwd2: Arc<dyn Fft<f64>>,
    pub inv2: Arc<dyn Fft<f64>>,
    /// `1/|k|^2` per stored mode (zero at the origin).
    pub inv_lap: Vec<f64>,
}

/// Uniform grid on the periodic box with periods `2` along `x1` and `2m` along `x2`.
#[derive(Clone)]
pub struct TorusGrid {
    n1: usize,
    n2: usize,
    m: usize,
    pub(crate) plans: Arc<Plans>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("n1", &self.n1)
            .field("n2", &self.n2)
            .field("m", &self.m)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n1 == other.n1 && self.n2 == other.n2 && self.m == other.m
    }
}

impl Eq for TorusGrid {}

impl TorusGrid {
    /// Builds the grid, rejecting odd or undersized dimensions.
    pub fn new(n1: usize, n2: usize, m: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::Sizing(format!("m = {m} must be >= 1")));
        }
        for (name, n) in [("n1", n1), ("n2", n2)] {
            if n % 2 != 0 {
                return Err(Error::Sizing(format!("{name} = {n} must be even")));
            }
            if n < 8 {
                return Err(Error::Sizing(format!("{name} = {n} must be >= 8")));
            }
        }
        if n2 < 8 * m {
            return Err(Error::Sizing(format!(
                "n2/m = {}/{} must be >= 8 points per unit height",
                n2, m
            )));
        }
        let mut real = RealFftPlanner::<f64>::new();
        let mut cplx = FftPlanner::<f64>::new();
        let plans = Plans {
            r2c: real.plan_fft_forward(n1),
            c2r: real.plan_fft_inverse(n1),
            fwd2: cplx.plan_fft_forward(n2),
            inv2: cplx.plan_fft_inverse(n2),
            inv_lap: Vec::new(),
        };
        let mut grid = Self {
            n1,
            n2,
            m,
            plans: Arc::new(plans),
        };
        let mut inv_lap = vec![0.0; grid.spectral_len()];
        for i1 in 0..grid.nh() {
            for i2 in 0..n2 {
                let kk = grid.k1(i1).powi(2) + grid.k2(i2).powi(2);
                if kk > 0.0 {
                    inv_lap[i1 * n2 + i2] = 1.0 / kk;
                }
            }
        }
        Arc::get_mut(&mut grid.plans)
            .expect("fresh plans are unshared")
            .inv_lap = inv_lap;
        Ok(grid)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of stored `k1` columns, `n1/2 + 1`.
    pub fn nh(&self) -> usize {
        self.n1 / 2 + 1
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spectral_len(&self) -> usize {
        self.nh() * self.n2
    }

    pub fn period1(&self) -> f64 {
        2.0
    }

    pub fn period2(&self) -> f64 {
        2.0 * self.m as f64
    }

    pub fn area(&self) -> f64 {
        self.period1() * self.period2()
    }

    pub fn dx1(&self) -> f64 {
        self.period1() / self.n1 as f64
    }

    pub fn dx2(&self) -> f64 {
        self.period2() / self.n2 as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx1() * self.dx2()
    }

    /// Fundamental wavenumber along `x1` (`pi`).
    pub fn dk1(&self) -> f64 {
        PI
    }

    /// Fundamental wavenumber along `x2` (`pi/m`).
    pub fn dk2(&self) -> f64 {
        PI / self.m as f64
    }

    pub fn x1(&self, i: usize) -> f64 {
        i as f64 * self.dx1()
    }

    pub fn x2(&self, j: usize) -> f64 {
        j as f64 * self.dx2()
    }

    /// Signed mode index along `x2` for storage position `i2`, in `-n2/2+1..=n2/2`.
    pub fn index2(&self, i2: usize) -> i64 {
        if i2 <= self.n2 / 2 {
            i2 as i64
        } else {
            i2 as i64 - self.n2 as i64
        }
    }

    pub fn k1(&self, i1: usize) -> f64 {
        self.dk1() * i1 as f64
    }

    pub fn k2(&self, i2: usize) -> f64 {
        self.dk2() * self.index2(i2) as f64
    }

    /// Storage position of a signed `x2` mode index.
    pub fn slot2(&self, index: i64) -> usize {
        index.rem_euclid(self.n2 as i64) as usize
    }

    /// Whether mode `(i1, i2)` survives the 2/3 truncation (`3|index| < n`, alias-free
    /// also when `n` is a multiple of three).
    pub fn retained(&self, i1: usize, i2: usize) -> bool {
        debug_assert!(i1 < self.nh());
        3 * i1 < self.n1 && 3 * (self.index2(i2).unsigned_abs() as usize) < self.n2
    }

    /// `1/|k|^2` per stored mode, zero at the origin.
    pub(crate) fn inv_lap(&self) -> &[f64] {
        &self.plans.inv_lap
    }

    /// Number of leading `k1` columns kept by the 2/3 truncation.
    pub fn retained_columns(&self) -> usize {
        self.n1.div_ceil(3)
    }

    /// Weight of a stored mode in sums over the full spectrum (conjugate partner counted).
    pub(crate) fn hermitian_weight(&self, i1: usize) -> f64 {
        if i1 == 0 || i1 == self.n1 / 2 {
            1.0
        } else {
            2.0
        }
    }

    pub(crate) fn check_physical(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::Shape {
                expected: self.len(),
                got: len,
            });
        }
        Ok(())
    }

    /// Grid samples of a function of `(x1, x2)`.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.n2 {
            let x2 = self.x2(j);
            for i in 0..self.n1 {
                out.push(f(self.x1(i), x2));
            }
        }
        out
    }

    /// Wraps a point into the fundamental domain `[0,2) x [0,2m)`.
    pub fn wrap(&self, x1: f64, x2: f64) -> (f64, f64) {
        (x1.rem_euclid(self.period1()), x2.rem_euclid(self.period2()))
    }

    /// Forward transform of real grid values into half-spectrum series coefficients.
    pub(crate) fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        self.forward_columns(values, self.nh())
    }

    /// Forward transform computing only the columns `i1 < columns` (the rest are zero).
    pub(crate) fn forward_columns(&self, values: &[f64], columns: usize) -> Vec<Complex64> {
        let (n1, n2, nh) = (self.n1, self.n2, self.nh());
        let columns = columns.min(nh);
        let mut rows = vec![Complex64::default(); nh * n2];
        let mut input = vec![0.0; n1];
        let mut scratch = self.plans.r2c.make_scratch_vec();
        for j in 0..n2 {
            input.copy_from_slice(&values[j * n1..(j + 1) * n1]);
            self.plans
                .r2c
                .process_with_scratch(&mut input, &mut rows[j * nh..(j + 1) * nh], &mut scratch)
                .expect("r2c buffer sizes are fixed by the grid");
        }
        let mut out = vec![Complex64::default(); nh * n2];
        let scale = 1.0 / (n1 * n2) as f64;
        for jb in (0..n2).step_by(BLOCK) {
            let je = (jb + BLOCK).min(n2);
            for i1 in 0..columns {
                for j in jb..je {
                    out[i1 * n2 + j] = rows[j * nh + i1] * scale;
                }
            }
        }
        let mut scratch = vec![Complex64::default(); self.plans.fwd2.get_inplace_scratch_len()];
        for col in out.chunks_exact_mut(n2).take(columns) {
            self.plans.fwd2.process_with_scratch(col, &mut scratch);
        }
        for c in &mut out[columns * n2..] {
            *c = Complex64::default();
        }
        out
    }

    /// Partial inverse along `x2`: returns `g[i1 * n2 + j] = sum_i2 c[i1,i2] exp(i k2 x2_j)`.
    pub(crate) fn inverse_x2(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut work = coeffs.to_vec();
        let mut scratch = vec![Complex64::default(); self.plans.inv2.get_inplace_scratch_len()];
        for col in work.chunks_exact_mut(self.n2) {
            if col.iter().any(|c| c.re != 0.0 || c.im != 0.0) {
                self.plans.inv2.process_with_scratch(col, &mut scratch);
            }
        }
        work
    }

    /// Inverse of `forward`: grid values of the truncated series.
    pub(crate) fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let (n1, n2, nh) = (self.n1, self.n2, self.nh());
        let work = self.inverse_x2(coeffs);
        let mut rows = vec![Complex64::default(); nh * n2];
        for jb in (0..n2).step_by(BLOCK) {
            let je = (jb + BLOCK).min(n2);
            for i1 in 0..nh {
                for j in jb..je {
                    rows[j * nh + i1] = work[i1 * n2 + j];
                }
            }
        }
        let mut out = vec![0.0; n1 * n2];
        let mut scratch = self.plans.c2r.make_scratch_vec();
        for (row, dst) in rows.chunks_exact_mut(nh).zip(out.chunks_exact_mut(n1)) {
            row[0].im = 0.0;
            row[nh - 1].im = 0.0;
            self.plans
                .c2r
                .process_with_scratch(row, dst, &mut scratch)
                .expect("c2r buffer sizes are fixed by the grid");
        }
        out
    }

    /// Real inverse along `x1` of one row of half-spectrum values.
    pub(crate) fn inverse_row(&self, row: &mut [Complex64], out: &mut [f64]) {
        let nh = self.nh();
        row[0].im = 0.0;
        row[nh - 1].im = 0.0;
        let mut scratch = self.plans.c2r.make_scratch_vec();
        self.plans
            .c2r
            .process_with_scratch(row, out, &mut scratch)
            .expect("c2r buffer sizes are fixed by the grid");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_box() {
        let g = TorusGrid::new(64, 64, 1).unwrap();
        assert_eq!(g.area(), 4.0);
        assert_eq!(g.dk1(), PI);
        assert_eq!(g.dk2(), PI);
        assert!((g.cell_area() * g.len() as f64 - 4.0).abs() < 1e-14);
    }

    #[test]
    fn anisotropic_box() {
        let g = TorusGrid::new(64, 256, 4).unwrap();
        assert_eq!(g.area(), 16.0);
        assert_eq!(g.dk2(), PI / 4.0);
        assert_eq!(g.k2(255), -PI / 4.0);
        assert_eq!(g.k2(128), 128.0 * PI / 4.0);
    }

    #[test]
    fn sizing_bounds() {
        assert!(TorusGrid::new(64, 64, 4).is_ok());
        let err = TorusGrid::new(64, 32, 8).unwrap_err();
        assert!(err.to_string().contains("n2/m"), "{err}");
        assert!(TorusGrid::new(63, 64, 1)
            .unwrap_err()
            .to_string()
            .contains("even"));
        assert!(TorusGrid::new(6, 64, 1)
            .unwrap_err()
            .to_string()
            .contains(">= 8"));
        assert!(TorusGrid::new(8, 64, 0).is_err());
    }

    #[test]
    fn retained_modes_follow_two_thirds_rule() {
        let g = TorusGrid::new(64, 64, 1).unwrap();
        assert!(g.retained(21, 0));
        assert!(!g.retained(22, 0));
        assert!(g.retained(0, g.slot2(-21)));
        assert!(!g.retained(0, g.slot2(-22)));
        assert!(!g.retained(0, 32));
    }
}
