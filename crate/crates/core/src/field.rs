//! Spectral representation of real scalar fields on the torus.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

/// Fourier coefficients of a real field; see [`crate::grid`] for the layout.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &TorusGrid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![Complex64::default(); grid.spectral_len()],
        }
    }

    pub fn from_coeffs(grid: &TorusGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.spectral_len() {
            return Err(Error::Shape {
                expected: grid.spectral_len(),
                got: coeffs.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Forward transform of grid samples.
    pub fn from_values(grid: &TorusGrid, values: &[f64]) -> Result<Self> {
        grid.check_physical(values.len())?;
        Ok(Self {
            grid: grid.clone(),
            coeffs: grid.forward(values),
        })
    }

    pub fn from_fn(grid: &TorusGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.sample(f);
        Self {
            grid: grid.clone(),
            coeffs: grid.forward(&values),
        }
    }

    /// Grid values of the truncated series.
    pub fn to_values(&self) -> Vec<f64> {
        self.grid.inverse(&self.coeffs)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of the mode with signed indices `(index1, index2)`,
    /// using Hermitian symmetry for `index1 < 0`.
    pub fn coeff(&self, index1: i64, index2: i64) -> Complex64 {
        let g = &self.grid;
        if index1 >= 0 {
            self.coeffs[index1 as usize * g.n2() + g.slot2(index2)]
        } else {
            self.coeffs[(-index1) as usize * g.n2() + g.slot2(-index2)].conj()
        }
    }

    pub fn set_coeff(&mut self, index1: usize, index2: i64, value: Complex64) {
        let slot = index1 * self.grid.n2() + self.grid.slot2(index2);
        self.coeffs[slot] = value;
    }

    pub fn mean(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.norm_sqr())
            .fold(0.0, f64::max)
            .sqrt()
    }

    fn check_same_grid(&self, other: &Self) {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Self) {
        self.check_same_grid(other);
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += o * a;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.coeffs {
            *c *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Multiplication by `i k_axis`; the Nyquist mode of that axis is zeroed.
    pub fn derivative(&self, axis: Axis) -> Self {
        let g = &self.grid;
        let (nh, n2) = (g.nh(), g.n2());
        let mut out = self.clone();
        for i1 in 0..nh {
            for i2 in 0..n2 {
                let c = &mut out.coeffs[i1 * n2 + i2];
                let (k, nyquist) = match axis {
                    Axis::X1 => (g.k1(i1), i1 == g.n1() / 2),
                    Axis::X2 => (g.k2(i2), i2 == n2 / 2),
                };
                *c = if nyquist {
                    Complex64::default()
                } else {
                    *c * Complex64::new(0.0, k)
                };
            }
        }
        out
    }

    /// Laplacian, `-|k|^2` multiplication.
    pub fn laplacian(&self) -> Self {
        let g = &self.grid;
        let mut out = self.clone();
        for i1 in 0..g.nh() {
            let k1 = g.k1(i1);
            for i2 in 0..g.n2() {
                let k2 = g.k2(i2);
                out.coeffs[i1 * g.n2() + i2] *= -(k1 * k1 + k2 * k2);
            }
        }
        out
    }

    /// 2/3-rule truncation in place.
    pub fn dealias_in_place(&mut self) {
        let g = self.grid.clone();
        let n2 = g.n2();
        for i1 in 0..g.nh() {
            for i2 in 0..n2 {
                if !g.retained(i1, i2) {
                    self.coeffs[i1 * n2 + i2] = Complex64::default();
                }
            }
        }
    }

    pub fn dealias(&self) -> Self {
        let mut out = self.clone();
        out.dealias_in_place();
        out
    }

    /// Restores `c(0,-k2) = conj c(0,k2)` (and likewise on the `k1` Nyquist column)
    /// by averaging each conjugate pair.
    pub fn enforce_hermitian(&mut self) {
        let g = self.grid.clone();
        let n2 = g.n2();
        let cols: &[usize] = &[0, g.nh() - 1];
        for &i1 in cols {
            let base = i1 * n2;
            for i2 in 0..=n2 / 2 {
                let j2 = (n2 - i2) % n2;
                let a = self.coeffs[base + i2];
                let b = self.coeffs[base + j2];
                let avg = (a + b.conj()) * 0.5;
                self.coeffs[base + i2] = avg;
                self.coeffs[base + j2] = avg.conj();
            }
        }
    }

    /// Largest violation of Hermitian symmetry on the self-conjugate columns.
    pub fn hermitian_defect(&self) -> f64 {
        let g = &self.grid;
        let n2 = g.n2();
        let mut worst = 0.0f64;
        for i1 in [0, g.nh() - 1] {
            for i2 in 0..n2 {
                let j2 = (n2 - i2) % n2;
                let d = (self.coeffs[i1 * n2 + i2] - self.coeffs[i1 * n2 + j2].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Sum over the full spectrum of `|c_k|^2`.
    pub fn spectral_energy(&self) -> f64 {
        let g = &self.grid;
        let n2 = g.n2();
        let mut total = 0.0;
        for i1 in 0..g.nh() {
            let w = g.hermitian_weight(i1);
            let row: f64 = self.coeffs[i1 * n2..(i1 + 1) * n2]
                .iter()
                .map(|c| c.norm_sqr())
                .sum();
            total += w * row;
        }
        total
    }

    /// `L2` norm over the box (area `4m`), via Parseval.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.area() * self.spectral_energy()).sqrt()
    }

    /// `L2` inner product over the box.
    pub fn inner(&self, other: &Self) -> f64 {
        self.check_same_grid(other);
        let g = &self.grid;
        let n2 = g.n2();
        let mut total = 0.0;
        for i1 in 0..g.nh() {
            let w = g.hermitian_weight(i1);
            let row: f64 = self.coeffs[i1 * n2..(i1 + 1) * n2]
                .iter()
                .zip(&other.coeffs[i1 * n2..(i1 + 1) * n2])
                .map(|(a, b)| (a * b.conj()).re)
                .sum();
            total += w * row;
        }
        g.area() * total
    }

    /// Fraction of `sum |c|^2 weight(k)` that sits outside the 2/3-retained set.
    pub fn tail_fraction(&self, weight: impl Fn(f64, f64) -> f64) -> f64 {
        let g = &self.grid;
        let n2 = g.n2();
        let (mut tail, mut total) = (0.0, 0.0);
        for i1 in 0..g.nh() {
            let hw = g.hermitian_weight(i1);
            for i2 in 0..n2 {
                let e = hw * self.coeffs[i1 * n2 + i2].norm_sqr() * weight(g.k1(i1), g.k2(i2));
                total += e;
                if !g.retained(i1, i2) {
                    tail += e;
                }
            }
        }
        if total > 0.0 {
            tail / total
        } else {
            0.0
        }
    }

    /// Largest coefficient magnitude outside the retained set, relative to the largest overall.
    pub fn tail_peak_ratio(&self) -> f64 {
        let g = &self.grid;
        let n2 = g.n2();
        let (mut tail, mut peak) = (0.0f64, 0.0f64);
        for i1 in 0..g.nh() {
            for i2 in 0..n2 {
                let a = self.coeffs[i1 * n2 + i2].norm();
                peak = peak.max(a);
                if !g.retained(i1, i2) {
                    tail = tail.max(a);
                }
            }
        }
        if peak > 0.0 {
            tail / peak
        } else {
            0.0
        }
    }
}

/// `L2` norm of a vector field given by its two components.
pub fn vector_l2_norm(a: &SpectralField, b: &SpectralField) -> f64 {
    (a.l2_norm().powi(2) + b.l2_norm().powi(2)).sqrt()
}

/// Grid-quadrature `L2` norm of sampled values (rectangle rule).
pub fn quadrature_l2_norm(grid: &TorusGrid, values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() * grid.cell_area()).sqrt()
}
