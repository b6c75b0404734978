//! Lagrangian flow maps on a label grid and the Jacobi field along the shear
//! flow map.
//!
//! Particles are advanced with classical RK4 using the velocity fields of the
//! solver's own RK4 stages, so particles and vorticity form one coupled RK4
//! system. Displacements `d = eta - a` are kept unwrapped.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::euler::{self, FlowState};
use crate::eval::{eval_many_at_points, eval_sheared};
use crate::field::SpectralField;
use crate::grid::TorusGrid;
use crate::stepping::{TimeStepping, VelocityProvider, RK4_NODES};
use crate::velocity::{velocity_from_vorticity, Velocity};

/// Uniform grid of initial positions `a = (i * 2/p1, j * 2m/p2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelGrid {
    p1: usize,
    p2: usize,
    m: usize,
}

impl LabelGrid {
    pub fn new(p1: usize, p2: usize, m: usize) -> Result<Self> {
        if p1 < 4 || p2 < 4 || m < 1 {
            return Err(Error::Sizing(format!(
                "label grid {p1} x {p2} (m = {m}) needs at least 4 labels per axis"
            )));
        }
        Ok(Self { p1, p2, m })
    }

    /// Every `stride1`-th / `stride2`-th grid point.
    pub fn subgrid(grid: &TorusGrid, stride1: usize, stride2: usize) -> Result<Self> {
        if stride1 == 0
            || stride2 == 0
            || !grid.n1().is_multiple_of(stride1)
            || !grid.n2().is_multiple_of(stride2)
        {
            return Err(Error::Sizing(format!(
                "label strides ({stride1}, {stride2}) must divide the grid ({}, {})",
                grid.n1(),
                grid.n2()
            )));
        }
        Self::new(grid.n1() / stride1, grid.n2() / stride2, grid.m())
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn p2(&self) -> usize {
        self.p2
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.p1 * self.p2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn da1(&self) -> f64 {
        2.0 / self.p1 as f64
    }

    pub fn da2(&self) -> f64 {
        2.0 * self.m as f64 / self.p2 as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.da1() * self.da2()
    }

    pub fn label(&self, il: usize, jl: usize) -> (f64, f64) {
        (il as f64 * self.da1(), jl as f64 * self.da2())
    }

    /// All labels, row-major with `a1` fastest.
    pub fn labels(&self) -> Vec<(f64, f64)> {
        (0..self.p2)
            .flat_map(|jl| (0..self.p1).map(move |il| (jl, il)))
            .map(|(jl, il)| self.label(il, jl))
            .collect()
    }

    /// Strides if the labels are a subgrid of `grid`.
    pub fn strides_on(&self, grid: &TorusGrid) -> Option<(usize, usize)> {
        (grid.m() == self.m
            && grid.n1().is_multiple_of(self.p1)
            && grid.n2().is_multiple_of(self.p2))
        .then(|| (grid.n1() / self.p1, grid.n2() / self.p2))
    }
}

/// `L2` norm over labels of a field with the given components.
pub fn label_l2_norm(labels: &LabelGrid, components: &[&[f64]]) -> f64 {
    let sum: f64 = components
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>())
        .sum();
    (sum * labels.cell_area()).sqrt()
}

/// Particle displacements `d(t, a)` with `eta(t, a) = a + d(t, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    pub labels: LabelGrid,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub t: f64,
}

impl FlowMap {
    pub fn identity(labels: LabelGrid) -> Self {
        Self {
            labels,
            d1: vec![0.0; labels.len()],
            d2: vec![0.0; labels.len()],
            t: 0.0,
        }
    }

    /// Positions `a + d`, unwrapped.
    pub fn positions(&self) -> Vec<(f64, f64)> {
        self.labels
            .labels()
            .iter()
            .zip(self.d1.iter().zip(&self.d2))
            .map(|(&(a1, a2), (&d1, &d2))| (a1 + d1, a2 + d2))
            .collect()
    }

    /// `max |det(grad_a eta) - 1|` from centred differences on the (periodic) label grid.
    pub fn volume_defect(&self) -> f64 {
        let (p1, p2) = (self.labels.p1, self.labels.p2);
        let (h1, h2) = (2.0 * self.labels.da1(), 2.0 * self.labels.da2());
        let at = |v: &[f64], i: usize, j: usize| v[j * p1 + i];
        (0..p2)
            .into_par_iter()
            .map(|j| {
                let (jp, jm) = ((j + 1) % p2, (j + p2 - 1) % p2);
                let mut worst = 0.0f64;
                for i in 0..p1 {
                    let (ip, im) = ((i + 1) % p1, (i + p1 - 1) % p1);
                    let a11 = 1.0 + (at(&self.d1, ip, j) - at(&self.d1, im, j)) / h1;
                    let a12 = (at(&self.d1, i, jp) - at(&self.d1, i, jm)) / h2;
                    let a21 = (at(&self.d2, ip, j) - at(&self.d2, im, j)) / h1;
                    let a22 = 1.0 + (at(&self.d2, i, jp) - at(&self.d2, i, jm)) / h2;
                    worst = worst.max((a11 * a22 - a12 * a21 - 1.0).abs());
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Values of `(u1, u2)` at the points.
fn velocity_at(u: &Velocity, points: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    let mut v = eval_many_at_points(&[&u.u1, &u.u2], points);
    let b = v.pop().unwrap();
    let a = v.pop().unwrap();
    (a, b)
}

/// RK4 update of the flow map over `[fm.t, fm.t + dt]`, with the velocity of
/// stage `s` taken from `provider` at time `fm.t + c_s dt`.
pub fn advect(fm: &FlowMap, provider: &dyn VelocityProvider, dt: f64) -> Result<FlowMap> {
    let base = fm.positions();
    let mut k: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(4);
    for s in 0..4 {
        let u = provider.velocity(s, fm.t + RK4_NODES[s] * dt)?;
        let points: Vec<(f64, f64)> = if s == 0 {
            base.clone()
        } else {
            let (k1, k2) = &k[s - 1];
            let c = RK4_NODES[s] * dt;
            base.iter()
                .enumerate()
                .map(|(i, &(x1, x2))| (x1 + c * k1[i], x2 + c * k2[i]))
                .collect()
        };
        k.push(velocity_at(u, &points));
    }
    let mut out = fm.clone();
    for i in 0..out.d1.len() {
        out.d1[i] += dt / 6.0 * (k[0].0[i] + 2.0 * k[1].0[i] + 2.0 * k[2].0[i] + k[3].0[i]);
        out.d2[i] += dt / 6.0 * (k[0].1[i] + 2.0 * k[1].1[i] + 2.0 * k[2].1[i] + k[3].1[i]);
    }
    out.t = fm.t + dt;
    Ok(out)
}

/// The stationary shear `(f(x2), 0)` given by an `x1`-independent vorticity and a mean.
#[derive(Debug, Clone)]
pub struct ShearBase {
    velocity: Velocity,
    omega: SpectralField,
    rows: std::sync::OnceLock<(LabelGrid, Vec<f64>, Vec<f64>)>,
}

impl ShearBase {
    pub fn new(omega: &SpectralField, mean: (f64, f64)) -> Result<Self> {
        let n2 = omega.grid().n2();
        if omega.coeffs()[n2..].iter().any(|c| c.norm_sqr() > 0.0) || mean.1 != 0.0 {
            return Err(Error::Validation("base state is not a shear flow".into()));
        }
        Ok(Self {
            velocity: velocity_from_vorticity(omega, mean)?,
            omega: omega.clone(),
            rows: std::sync::OnceLock::new(),
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.omega.grid()
    }

    /// `f` and `f'` at heights `x2`.
    pub fn f_and_fprime(&self, x2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let pts: Vec<(f64, f64)> = x2.iter().map(|&y| (0.0, y)).collect();
        let mut v = eval_many_at_points(&[&self.velocity.u1, &self.omega], &pts);
        let w = v.pop().unwrap();
        (v.pop().unwrap(), w.into_iter().map(|x| -x).collect())
    }

    /// `f` and `f'` at the label row heights (cached for the first label grid).
    pub fn row_profile(&self, labels: &LabelGrid) -> (Vec<f64>, Vec<f64>) {
        let compute = |l: &LabelGrid| {
            let heights: Vec<f64> = (0..l.p2).map(|j| l.label(0, j).1).collect();
            let (f, fp) = self.f_and_fprime(&heights);
            (*l, f, fp)
        };
        let cached = self.rows.get_or_init(|| compute(labels));
        if cached.0 == *labels {
            (cached.1.clone(), cached.2.clone())
        } else {
            let (_, f, fp) = compute(labels);
            (f, fp)
        }
    }

    /// Flow map of the shear at time `t`: `d = (t f(a2), 0)`.
    pub fn flow_map(&self, labels: LabelGrid, t: f64) -> FlowMap {
        let (f, _) = self.row_profile(&labels);
        let mut fm = FlowMap::identity(labels);
        for (row, &fj) in fm.d1.chunks_mut(labels.p1).zip(f.iter()) {
            row.fill(t * fj);
        }
        fm.t = t;
        fm
    }

    /// Advances a flow map along the shear; RK4 is exact here since `x2` is constant.
    pub fn advance(&self, fm: &FlowMap, dt: f64) -> FlowMap {
        let mut out = fm.clone();
        out.t = fm.t + dt;
        if fm.d2.iter().all(|&v| v == 0.0) {
            let (f, _) = self.row_profile(&fm.labels);
            for (row, v) in out.d1.chunks_exact_mut(fm.labels.p1).zip(&f) {
                row.iter_mut().for_each(|d| *d += dt * v);
            }
            return out;
        }
        let heights: Vec<f64> = fm
            .labels
            .labels()
            .iter()
            .zip(&fm.d2)
            .map(|(&(_, a2), &d2)| a2 + d2)
            .collect();
        let (f, _) = self.f_and_fprime(&heights);
        for (d, v) in out.d1.iter_mut().zip(&f) {
            *d += dt * v;
        }
        out
    }
}

/// `J = d eta / d sigma` at `sigma = 0` on the label grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiField {
    pub labels: LabelGrid,
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
    pub t: f64,
}

/// `(||J||, ||J1||, ||J2||)` over labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiNorms {
    pub total: f64,
    pub j1: f64,
    pub j2: f64,
}

impl JacobiField {
    pub fn zero(labels: LabelGrid) -> Self {
        Self {
            labels,
            j1: vec![0.0; labels.len()],
            j2: vec![0.0; labels.len()],
            t: 0.0,
        }
    }

    /// Central difference `(eta(+sigma) - eta(-sigma)) / (2 sigma)` of two flow maps.
    pub fn from_difference(plus: &FlowMap, minus: &FlowMap, sigma: f64) -> Result<Self> {
        if plus.labels != minus.labels || (plus.t - minus.t).abs() > 1e-12 {
            return Err(Error::Validation(
                "flow maps differ in labels or time".into(),
            ));
        }
        let h = 0.5 / sigma;
        Ok(Self {
            labels: plus.labels,
            j1: plus
                .d1
                .iter()
                .zip(&minus.d1)
                .map(|(a, b)| (a - b) * h)
                .collect(),
            j2: plus
                .d2
                .iter()
                .zip(&minus.d2)
                .map(|(a, b)| (a - b) * h)
                .collect(),
            t: plus.t,
        })
    }

    pub fn norms(&self) -> JacobiNorms {
        JacobiNorms {
            total: label_l2_norm(&self.labels, &[&self.j1, &self.j2]),
            j1: label_l2_norm(&self.labels, &[&self.j1]),
            j2: label_l2_norm(&self.labels, &[&self.j2]),
        }
    }

    /// Largest pointwise distance to another field on the same labels.
    pub fn max_distance(&self, other: &Self) -> f64 {
        self.j1
            .iter()
            .zip(&other.j1)
            .chain(self.j2.iter().zip(&other.j2))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Rows of a shear-shaped flow map: `Some(d1 per row)` when `d2 = 0` and `d1` is
/// constant along every label row.
fn shear_rows(fm: &FlowMap) -> Option<Vec<f64>> {
    if fm.d2.iter().any(|&v| v != 0.0) {
        return None;
    }
    let p1 = fm.labels.p1;
    fm.d1
        .chunks_exact(p1)
        .map(|row| row.iter().all(|&v| v == row[0]).then_some(row[0]))
        .collect()
}

/// RK4 update of `J' = (f'(eta2) J2 + dU1(eta), dU2(eta))` along the shear flow map `fm`,
/// with `dU` at stage `s` taken from `provider` at time `J.t + c_s dt`.
pub fn jacobi_step(
    jf: &JacobiField,
    fm: &FlowMap,
    provider: &dyn VelocityProvider,
    base: &ShearBase,
    dt: f64,
) -> Result<JacobiField> {
    if jf.labels != fm.labels || (jf.t - fm.t).abs() > 1e-12 * jf.t.abs().max(1.0) {
        return Err(Error::Sync {
            stage: 0,
            requested: jf.t,
            available: fm.t,
        });
    }
    let labels = jf.labels;
    let (p1, n) = (labels.p1, labels.len());
    let positions = fm.positions();
    let heights: Vec<f64> = positions.iter().map(|p| p.1).collect();
    let fast = labels.strides_on(base.grid()).zip(shear_rows(fm));
    // f and f' at the base positions (x2 is the same at every stage).
    let (f, fp) = match &fast {
        Some(_) => {
            let (f, fp) = base.row_profile(&labels);
            let expand = |v: Vec<f64>| -> Vec<f64> {
                v.iter().flat_map(|&x| std::iter::repeat_n(x, p1)).collect()
            };
            (expand(f), expand(fp))
        }
        None => base.f_and_fprime(&heights),
    };
    let mut k: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(4);
    for s in 0..4 {
        let c = RK4_NODES[s] * dt;
        let u = provider.velocity(s, jf.t + c)?;
        let (du1, du2) = match &fast {
            Some(((s1, s2), rows)) => {
                let shifts: Vec<f64> = rows
                    .iter()
                    .enumerate()
                    .map(|(j, d)| d + c * f[j * p1])
                    .collect();
                (
                    eval_sheared(&u.u1, *s1, *s2, &shifts)?,
                    eval_sheared(&u.u2, *s1, *s2, &shifts)?,
                )
            }
            None => {
                let pts: Vec<(f64, f64)> = positions
                    .iter()
                    .zip(&f)
                    .map(|(&(x1, x2), &fv)| (x1 + c * fv, x2))
                    .collect();
                velocity_at(u, &pts)
            }
        };
        let j2_stage: Vec<f64> = if s == 0 {
            jf.j2.clone()
        } else {
            (0..n).map(|i| jf.j2[i] + c * k[s - 1].1[i]).collect()
        };
        let k1: Vec<f64> = (0..n).map(|i| fp[i] * j2_stage[i] + du1[i]).collect();
        k.push((k1, du2));
    }
    let mut out = jf.clone();
    for i in 0..n {
        out.j1[i] += dt / 6.0 * (k[0].0[i] + 2.0 * k[1].0[i] + 2.0 * k[2].0[i] + k[3].0[i]);
        out.j2[i] += dt / 6.0 * (k[0].1[i] + 2.0 * k[1].1[i] + 2.0 * k[2].1[i] + k[3].1[i]);
    }
    out.t = jf.t + dt;
    Ok(out)
}

/// One sample of the finite-difference route.
#[derive(Debug, Clone)]
pub struct FdSample {
    pub t: f64,
    pub jacobi: JacobiField,
    /// `(||dU1||, ||dU2||)` of `(u(+sigma) - u(-sigma)) / (2 sigma)`.
    pub du: (f64, f64),
    /// Largest volume defect of the two flow maps.
    pub volume_defect: f64,
}

/// Jacobi field by central differences of two nonlinear runs from
/// `base +- sigma * perturbation`, each carrying its own flow map.
pub fn fd_jacobi(
    base: &FlowState,
    perturbation: &SpectralField,
    sigma: f64,
    labels: LabelGrid,
    sample_times: &[f64],
    policy: TimeStepping,
) -> Result<Vec<FdSample>> {
    let run = |sign: f64| -> Result<Vec<(FlowMap, Velocity)>> {
        let mut w = base.omega.clone();
        w.axpy(sign * sigma, perturbation);
        let s0 = FlowState::at_time(w, base.mean, base.t)?;
        let mut fm = FlowMap::identity(labels);
        fm.t = base.t;
        let fm = std::cell::RefCell::new(fm);
        let out = std::cell::RefCell::new(Vec::with_capacity(sample_times.len()));
        crate::stepping::integrate(
            &euler::Euler { mean: s0.mean },
            &s0.omega,
            s0.t,
            sample_times,
            policy,
            |st| {
                let next = advect(&fm.borrow(), st, st.dt)?;
                *fm.borrow_mut() = next;
                Ok(())
            },
            |t, omega| {
                let mut map = fm.borrow().clone();
                map.t = t;
                out.borrow_mut()
                    .push((map, velocity_from_vorticity(omega, s0.mean)?));
                Ok(())
            },
        )?;
        Ok(out.into_inner())
    };
    let (plus, minus) = rayon::join(|| run(1.0), || run(-1.0));
    let (plus, minus) = (plus?, minus?);
    plus.into_iter()
        .zip(minus)
        .map(|((fp, up), (fm, um))| {
            let h = 0.5 / sigma;
            let du1 = up.u1.sub(&um.u1).scaled(h).l2_norm();
            let du2 = up.u2.sub(&um.u2).scaled(h).l2_norm();
            Ok(FdSample {
                t: fp.t,
                volume_defect: fp.volume_defect().max(fm.volume_defect()),
                jacobi: JacobiField::from_difference(&fp, &fm, sigma)?,
                du: (du1, du2),
            })
        })
        .collect()
}

/// Slope at `t = 0` of `||J(t)||` from a least-squares fit `a t + b t^2` over `[0, tau]`.
pub fn initial_slope(times: &[f64], norms: &[f64], tau: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(norms)
        .filter(|(&t, _)| t > 0.0 && t <= tau * (1.0 + 1e-12))
        .map(|(&t, &n)| (t, n))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Fit(format!(
            "initial slope needs at least 4 samples in (0, {tau}], got {}",
            pts.len()
        )));
    }
    // Normal equations for y = a t + b t^2.
    let (mut s2, mut s3, mut s4, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, y) in &pts {
        s2 += t * t;
        s3 += t * t * t;
        s4 += t * t * t * t;
        y1 += t * y;
        y2 += t * t * y;
    }
    let det = s2 * s4 - s3 * s3;
    if det.abs() <= f64::EPSILON * s2 * s4 {
        return Err(Error::Fit("initial slope fit is degenerate".into()));
    }
    Ok((y1 * s4 - y2 * s3) / det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{ProfileSpec, ShearProfile};
    use crate::stepping::SteadyVelocity;
    use std::f64::consts::PI;

    fn couette_base(m: usize, n1: usize) -> (TorusGrid, ShearProfile, ShearBase) {
        let g = TorusGrid::new(n1, 128 * m, m).unwrap();
        let p = ShearProfile::new(ProfileSpec::SmoothedCouette { delta: 0.2 }, m).unwrap();
        let (w, mean) = p.vorticity(&g).unwrap();
        let b = ShearBase::new(&w, mean).unwrap();
        (g, p, b)
    }

    #[test]
    fn label_norms() {
        let l = LabelGrid::new(16, 16, 1).unwrap();
        let ones = vec![1.0; l.len()];
        let zeros = vec![0.0; l.len()];
        assert!((label_l2_norm(&l, &[&ones, &zeros]) - 2.0).abs() < 1e-14);
        let s: Vec<f64> = l.labels().iter().map(|&(a1, _)| (PI * a1).sin()).collect();
        assert!((label_l2_norm(&l, &[&s]) - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn label_norm_matches_spectral_norm() {
        let g = TorusGrid::new(32, 64, 2).unwrap();
        let mut f = crate::field::tests::random_smooth(&g, 9, 5);
        f.dealias_in_place();
        let l = LabelGrid::new(32, 64, 2).unwrap();
        let vals = crate::eval::eval_at_points(&f, &l.labels());
        let a = label_l2_norm(&l, &[&vals]);
        assert!(((a - f.l2_norm()) / f.l2_norm()).abs() < 1e-6);
    }

    #[test]
    fn shear_advection_is_exact() {
        let (g, p, base) = couette_base(4, 16);
        let labels = LabelGrid::subgrid(&g, 2, 4).unwrap();
        let u = SteadyVelocity(
            velocity_from_vorticity(&p.vorticity(&g).unwrap().0, (0.0, 0.0)).unwrap(),
        );
        let mut fm = FlowMap::identity(labels);
        for _ in 0..20 {
            fm = advect(&fm, &u, 0.05).unwrap();
        }
        let exact = base.flow_map(labels, 1.0);
        let err = fm
            .d1
            .iter()
            .zip(&exact.d1)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        assert!(fm.d2.iter().all(|v| v.abs() < 1e-14));
        assert!(fm.volume_defect() < 1e-12);
        for (il, jl) in [(0, 0), (3, 17), (5, 40)] {
            let a2 = labels.label(il, jl).1;
            assert!((exact.d1[jl * labels.p1() + il] - p.f(a2)).abs() < 1e-10);
        }
    }

    #[test]
    fn rigid_translation() {
        let g = TorusGrid::new(16, 16, 1).unwrap();
        let u = SteadyVelocity(
            velocity_from_vorticity(&SpectralField::zeros(&g), (0.3, -0.7)).unwrap(),
        );
        let mut fm = FlowMap::identity(LabelGrid::new(8, 8, 1).unwrap());
        for _ in 0..10 {
            fm = advect(&fm, &u, 0.1).unwrap();
        }
        assert!(fm.d1.iter().all(|v| (v - 0.3).abs() < 1e-13));
        assert!(fm.d2.iter().all(|v| (v + 0.7).abs() < 1e-13));
    }

    #[test]
    fn cellular_flow_is_reversible() {
        let g = TorusGrid::new(32, 32, 1).unwrap();
        let w = SpectralField::from_fn(&g, |x1, x2| (PI * x1).sin() * (PI * x2).sin());
        let u = velocity_from_vorticity(&w, (0.0, 0.0)).unwrap();
        let back = Velocity {
            u1: u.u1.scaled(-1.0),
            u2: u.u2.scaled(-1.0),
        };
        let labels = LabelGrid::new(64, 64, 1).unwrap();
        let mut fm = FlowMap::identity(labels);
        for _ in 0..50 {
            fm = advect(&fm, &SteadyVelocity(u.clone()), 0.02).unwrap();
        }
        assert!(fm.volume_defect() < 1e-3, "{}", fm.volume_defect());
        let moved = fm.d1.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(moved > 0.05);
        for _ in 0..50 {
            fm = advect(&fm, &SteadyVelocity(back.clone()), 0.02).unwrap();
        }
        let err = fm
            .d1
            .iter()
            .chain(&fm.d2)
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn jacobi_with_zero_forcing_stays_zero() {
        let (g, _, base) = couette_base(4, 16);
        let labels = LabelGrid::subgrid(&g, 2, 2).unwrap();
        let zero =
            SteadyVelocity(velocity_from_vorticity(&SpectralField::zeros(&g), (0.0, 0.0)).unwrap());
        let mut j = JacobiField::zero(labels);
        let mut fm = FlowMap::identity(labels);
        for _ in 0..5 {
            j = jacobi_step(&j, &fm, &zero, &base, 0.01).unwrap();
            fm = base.advance(&fm, 0.01);
        }
        assert_eq!(j.norms().total, 0.0);
    }

    #[test]
    fn jacobi_without_base_flow_integrates_forcing() {
        // f = 0: J(t, a) = t dU(a) for a steady forcing dU.
        let g = TorusGrid::new(16, 32, 1).unwrap();
        let base = ShearBase::new(&SpectralField::zeros(&g), (0.0, 0.0)).unwrap();
        let w = SpectralField::from_fn(&g, |x1, x2| (PI * x1 + 2.0 * PI * x2).cos());
        let du = velocity_from_vorticity(&w, (0.0, 0.0)).unwrap();
        let labels = LabelGrid::subgrid(&g, 2, 2).unwrap();
        let provider = SteadyVelocity(du.clone());
        let mut j = JacobiField::zero(labels);
        let mut fm = FlowMap::identity(labels);
        for _ in 0..10 {
            j = jacobi_step(&j, &fm, &provider, &base, 0.1).unwrap();
            fm = base.advance(&fm, 0.1);
        }
        let (u1, u2) = velocity_at(&du, &labels.labels());
        let err =
            j.j1.iter()
                .zip(&u1)
                .chain(j.j2.iter().zip(&u2))
                .map(|(a, b)| (a - 1.0 * b).abs())
                .fold(0.0, f64::max);
        assert!(err < 1e-13, "{err}");
        let slope = initial_slope(
            &[0.25, 0.5, 0.75, 1.0],
            &[
                0.25 * du.l2_norm(),
                0.5 * du.l2_norm(),
                0.75 * du.l2_norm(),
                du.l2_norm(),
            ],
            1.0,
        )
        .unwrap();
        assert!((slope - du.l2_norm()).abs() < 1e-12);
        assert!((j.norms().total - du.l2_norm()).abs() < 1e-12);
    }

    #[test]
    fn fast_and_generic_paths_agree() {
        let (g, _, base) = couette_base(4, 16);
        let labels = LabelGrid::subgrid(&g, 2, 4).unwrap();
        let w = SpectralField::from_fn(&g, |x1, x2| (PI * x1).cos() * (PI * x2 / 4.0).sin());
        let provider = SteadyVelocity(velocity_from_vorticity(&w, (0.0, 0.0)).unwrap());
        let fm = base.flow_map(labels, 0.7);
        let mut j0 = JacobiField::zero(labels);
        j0.t = 0.7;
        j0.j2
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = (i as f64 * 0.01).sin());
        let fast = jacobi_step(&j0, &fm, &provider, &base, 0.05).unwrap();
        // A negligible x2 displacement forces the generic path.
        let mut generic_fm = fm.clone();
        generic_fm.d2[1] = 1e-300;
        let slow = jacobi_step(&j0, &generic_fm, &provider, &base, 0.05).unwrap();
        assert!(
            fast.max_distance(&slow) < 1e-12,
            "{}",
            fast.max_distance(&slow)
        );
    }

    #[test]
    fn stale_flow_map_is_rejected() {
        let (g, _, base) = couette_base(4, 16);
        let labels = LabelGrid::subgrid(&g, 2, 2).unwrap();
        let zero =
            SteadyVelocity(velocity_from_vorticity(&SpectralField::zeros(&g), (0.0, 0.0)).unwrap());
        let fm = base.flow_map(labels, 0.5);
        let j = JacobiField::zero(labels);
        assert!(matches!(
            jacobi_step(&j, &fm, &zero, &base, 0.1),
            Err(Error::Sync { .. })
        ));
    }

    #[test]
    fn initial_slope_needs_samples() {
        assert!(initial_slope(&[0.0, 0.05, 0.1], &[0.0, 0.05, 0.1], 0.1).is_err());
        let t: Vec<f64> = (0..=10).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = t.iter().map(|t| 1.5 * t - 0.4 * t * t).collect();
        assert!((initial_slope(&t, &y, 0.1).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn fd_route_vanishes_for_zero_perturbation_and_at_t0() {
        let g = TorusGrid::new(16, 16, 1).unwrap();
        let p = ShearProfile::new(
            ProfileSpec::Kolmogorov {
                amplitude: 1.0,
                wavenumber: 1.0,
            },
            1,
        )
        .unwrap();
        let (w, mean) = p.vorticity(&g).unwrap();
        let s = FlowState::new(w, mean).unwrap();
        let labels = LabelGrid::new(8, 8, 1).unwrap();
        let out = fd_jacobi(
            &s,
            &SpectralField::zeros(&g),
            1e-3,
            labels,
            &[0.0, 0.1],
            TimeStepping::default(),
        )
        .unwrap();
        assert!(out.iter().all(|o| o.jacobi.norms().total == 0.0));
    }
}
