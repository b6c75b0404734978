//! Off-grid evaluation of spectral fields.
//!
//! [`eval_at_points`] sums the truncated Fourier series exactly, at a cost of
//! one pass over the active modes per point. [`eval_sheared`] is an exact fast
//! path for lattices whose rows are rigidly shifted along `x1` (the image of a
//! label grid under a shear flow map). [`RefinedInterpolator`] is an
//! approximate accelerator: spectral refinement followed by local bicubic
//! Lagrange interpolation.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::TorusGrid;

/// Compact table of the nonzero modes of one or more fields.
struct ModeTable {
    k1: Vec<f64>,
    dk2: f64,
    /// Largest `|index2|` with a nonzero coefficient.
    reach2: usize,
    /// Per field, `[i1][index2 + reach2]`, Hermitian weight folded in.
    tables: Vec<Vec<Complex64>>,
}

impl ModeTable {
    fn new(fields: &[&SpectralField]) -> Self {
        let g = fields[0].grid();
        let n2 = g.n2();
        let (mut top1, mut reach2) = (0usize, 0usize);
        for f in fields {
            assert_eq!(f.grid(), g, "fields live on different grids");
            for i1 in 0..g.nh() {
                for i2 in 0..n2 {
                    if f.coeffs()[i1 * n2 + i2] != Complex64::default() {
                        top1 = top1.max(i1);
                        reach2 = reach2.max(g.index2(i2).unsigned_abs() as usize);
                    }
                }
            }
        }
        let width = 2 * reach2 + 1;
        let tables = fields
            .iter()
            .map(|f| {
                let mut t = vec![Complex64::default(); (top1 + 1) * width];
                for i1 in 0..=top1 {
                    let w = g.hermitian_weight(i1);
                    for i2 in 0..n2 {
                        let idx = g.index2(i2);
                        if idx.unsigned_abs() as usize > reach2 {
                            continue;
                        }
                        let c = f.coeffs()[i1 * n2 + i2];
                        // The k2 Nyquist slot pairs with index -n2/2, which is
                        // not stored; its series term is taken as the real part.
                        t[i1 * width + (idx + reach2 as i64) as usize] += c * w;
                    }
                }
                t
            })
            .collect();
        Self {
            k1: (0..=top1).map(|i1| g.k1(i1)).collect(),
            dk2: g.dk2(),
            reach2,
            tables,
        }
    }

    fn eval(&self, x1: f64, x2: f64, phases: &mut [Complex64], out: &mut [f64]) {
        let r = self.reach2;
        let width = 2 * r + 1;
        let step = Complex64::cis(self.dk2 * x2);
        phases[r] = Complex64::new(1.0, 0.0);
        for q in 1..=r {
            // Re-anchor periodically to keep the recurrence error at round-off.
            let p = if q % 64 == 0 {
                Complex64::cis(self.dk2 * x2 * q as f64)
            } else {
                phases[r + q - 1] * step
            };
            phases[r + q] = p;
            phases[r - q] = p.conj();
        }
        for (t, o) in self.tables.iter().zip(out.iter_mut()) {
            let mut total = 0.0;
            for (i1, &k1) in self.k1.iter().enumerate() {
                let row = &t[i1 * width..(i1 + 1) * width];
                let s: Complex64 = row.iter().zip(phases.iter()).map(|(c, p)| c * p).sum();
                total += (Complex64::cis(k1 * x1) * s).re;
            }
            *o = total;
        }
    }
}

/// Exact truncated-series values of `field` at arbitrary points.
pub fn eval_at_points(field: &SpectralField, points: &[(f64, f64)]) -> Vec<f64> {
    eval_many_at_points(&[field], points).pop().unwrap()
}

/// Exact values of several fields on the same grid at the same points;
/// returns one vector per field.
pub fn eval_many_at_points(fields: &[&SpectralField], points: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let table = ModeTable::new(fields);
    let g = fields[0].grid();
    let nf = fields.len();
    let flat: Vec<f64> = points
        .par_chunks(64)
        .flat_map_iter(|chunk| {
            let mut phases = vec![Complex64::default(); 2 * table.reach2 + 1];
            let mut buf = vec![0.0; nf];
            let mut local = Vec::with_capacity(chunk.len() * nf);
            for &(x1, x2) in chunk {
                let (x1, x2) = g.wrap(x1, x2);
                table.eval(x1, x2, &mut phases, &mut buf);
                local.extend_from_slice(&buf);
            }
            local
        })
        .collect();
    (0..nf)
        .map(|f| flat.iter().skip(f).step_by(nf).copied().collect())
        .collect()
}

/// Exact values on a sheared sub-lattice of the grid: label `(il, jl)` sits at
/// `(x1(il * stride1) + shifts[jl], x2(jl * stride2))`. Output is row-major in
/// labels, `x1` fastest.
pub fn eval_sheared(
    field: &SpectralField,
    stride1: usize,
    stride2: usize,
    shifts: &[f64],
) -> Result<Vec<f64>> {
    let g = field.grid();
    if stride1 == 0
        || stride2 == 0
        || !g.n1().is_multiple_of(stride1)
        || !g.n2().is_multiple_of(stride2)
    {
        return Err(Error::Validation(format!(
            "label strides ({stride1}, {stride2}) must divide the grid ({}, {})",
            g.n1(),
            g.n2()
        )));
    }
    let rows = g.n2() / stride2;
    if shifts.len() != rows {
        return Err(Error::Shape {
            expected: rows,
            got: shifts.len(),
        });
    }
    let cols = g.n1() / stride1;
    let partial = g.inverse_x2(field.coeffs());
    let (n1, n2, nh) = (g.n1(), g.n2(), g.nh());
    let mut out = vec![0.0; rows * cols];
    out.par_chunks_mut(cols)
        .zip(shifts.par_iter())
        .enumerate()
        .for_each(|(jl, (dst, &shift))| {
            let j = jl * stride2;
            let mut row: Vec<Complex64> = (0..nh)
                .map(|i1| partial[i1 * n2 + j] * Complex64::cis(g.k1(i1) * shift))
                .collect();
            let mut line = vec![0.0; n1];
            g.inverse_row(&mut row, &mut line);
            for (il, d) in dst.iter_mut().enumerate() {
                *d = line[il * stride1];
            }
        });
    Ok(out)
}

/// Approximate evaluator: the field is refined spectrally by `refine` per axis
/// and then interpolated with 4x4-point Lagrange stencils.
pub struct RefinedInterpolator {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl RefinedInterpolator {
    pub fn new(field: &SpectralField, refine: usize) -> Result<Self> {
        let g = field.grid();
        let fine = TorusGrid::new(g.n1() * refine, g.n2() * refine, g.m())?;
        let mut padded = SpectralField::zeros(&fine);
        let n2 = g.n2();
        // Nyquist modes have no unambiguous continuation off the coarse grid
        // and are dropped; they are zero for dealiased fields anyway.
        for i1 in 0..g.nh() - 1 {
            for i2 in 0..n2 {
                if i2 == n2 / 2 {
                    continue;
                }
                padded.set_coeff(i1, g.index2(i2), field.coeffs()[i1 * n2 + i2]);
            }
        }
        padded.enforce_hermitian();
        Ok(Self {
            values: padded.to_values(),
            grid: fine,
        })
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let g = &self.grid;
        let (x1, x2) = g.wrap(x1, x2);
        let (s1, s2) = (x1 / g.dx1(), x2 / g.dx2());
        let (b1, b2) = (s1.floor(), s2.floor());
        let (t1, t2) = (s1 - b1, s2 - b2);
        let w1 = cubic_weights(t1);
        let w2 = cubic_weights(t2);
        let (n1, n2) = (g.n1() as i64, g.n2() as i64);
        let mut total = 0.0;
        for (q, wq) in w2.iter().enumerate() {
            let j = (b2 as i64 - 1 + q as i64).rem_euclid(n2) as usize;
            let row = &self.values[j * n1 as usize..(j + 1) * n1 as usize];
            let mut acc = 0.0;
            for (p, wp) in w1.iter().enumerate() {
                let i = (b1 as i64 - 1 + p as i64).rem_euclid(n1) as usize;
                acc += wp * row[i];
            }
            total += wq * acc;
        }
        total
    }

    pub fn eval_points(&self, points: &[(f64, f64)]) -> Vec<f64> {
        points.par_iter().map(|&(a, b)| self.eval(a, b)).collect()
    }
}

/// Lagrange weights for nodes `-1, 0, 1, 2` at offset `t` in `[0, 1)`.
fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}
