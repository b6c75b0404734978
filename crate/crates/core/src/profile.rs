//! Stationary shear profiles `u_inf = (f_m(x2), 0)` on the `2m`-periodic line,
//! with closed-form derivatives and a convergence checker against the
//! profile's `m -> infinity` limit.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::TorusGrid;

/// Profile family and its parameters, as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProfileSpec {
    /// `A sin(pi k x2)`; 2-periodic, hence valid for every `m`.
    Kolmogorov { amplitude: f64, wavenumber: f64 },
    /// Triangle wave equal to `x2` on `|x2| <= (1-delta) m/2`, corners smoothed
    /// over a window of width `delta m`.
    SmoothedCouette { delta: f64 },
    /// `tanh(a (m/pi) sin(pi x2/m))`, tending to `tanh(a x2)`.
    TanhShear { steepness: f64 },
    /// `mean + sum_j cos[j] cos(pi j x2) + sin[j] sin(pi j x2)` with `j` from 1.
    CustomSeries {
        #[serde(default)]
        mean: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

impl ProfileSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            ProfileSpec::Kolmogorov { .. } => "kolmogorov",
            ProfileSpec::SmoothedCouette { .. } => "smoothed_couette",
            ProfileSpec::TanhShear { .. } => "tanh_shear",
            ProfileSpec::CustomSeries { .. } => "custom_series",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ProfileSpec::Kolmogorov {
                amplitude,
                wavenumber,
            } => {
                if !(amplitude > 0.0) {
                    return Err(Error::Profile(format!(
                        "amplitude {amplitude} must be positive"
                    )));
                }
                if !(wavenumber >= 1.0 && wavenumber.fract() == 0.0) {
                    return Err(Error::Profile(format!(
                        "wavenumber {wavenumber} must be a positive integer"
                    )));
                }
            }
            ProfileSpec::SmoothedCouette { delta } => {
                if !(delta > 0.0 && delta < 0.5) {
                    return Err(Error::Profile(format!(
                        "delta {delta} must lie in (0, 1/2)"
                    )));
                }
            }
            ProfileSpec::TanhShear { steepness } => {
                if !(steepness > 0.0) {
                    return Err(Error::Profile(format!(
                        "steepness {steepness} must be positive"
                    )));
                }
            }
            ProfileSpec::CustomSeries {
                mean,
                ref cos,
                ref sin,
            } => {
                if !mean.is_finite() || cos.iter().chain(sin).any(|c| !c.is_finite()) {
                    return Err(Error::Profile("series coefficients must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

/// A shear profile bound to a box height `m`.
#[derive(Debug, Clone)]
pub struct ShearProfile {
    spec: ProfileSpec,
    m: usize,
    sup_fprime: f64,
}

/// Sample count per unit of `m` used for the `sup |f'|` search.
const SUP_SAMPLES_PER_M: usize = 8192;

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

impl ShearProfile {
    pub fn new(spec: ProfileSpec, m: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::Profile(format!("m = {m} must be >= 1")));
        }
        spec.validate()?;
        let mut p = Self {
            spec,
            m,
            sup_fprime: 0.0,
        };
        p.sup_fprime = p.compute_sup_fprime();
        Ok(p)
    }

    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn family_name(&self) -> &'static str {
        self.spec.family_name()
    }

    /// `||f_m'||_inf`, from dense sampling refined by golden-section search.
    pub fn sup_fprime(&self) -> f64 {
        self.sup_fprime
    }

    fn half_period(&self) -> f64 {
        self.m as f64
    }

    /// Reduces `x2` into `[-m, m)`.
    fn reduce(&self, x2: f64) -> f64 {
        let h = self.half_period();
        (x2 + h).rem_euclid(2.0 * h) - h
    }

    /// Gaussian smoothing scale of the Couette corners; the corner correction
    /// is below round-off at distance `8 s = delta m / 2` from the corner.
    fn corner_scale(delta: f64, m: f64) -> f64 {
        delta * m / 16.0
    }

    pub fn f(&self, x2: f64) -> f64 {
        match self.spec {
            ProfileSpec::Kolmogorov {
                amplitude,
                wavenumber,
            } => amplitude * (PI * wavenumber * x2).sin(),
            ProfileSpec::SmoothedCouette { delta } => {
                let m = self.m as f64;
                let s = Self::corner_scale(delta, m);
                let x = self.reduce(x2);
                -x + smoothed_abs(x + m / 2.0, s) - smoothed_abs(x - m / 2.0, s)
            }
            ProfileSpec::TanhShear { steepness } => {
                let m = self.m as f64;
                (steepness * m / PI * (PI * x2 / m).sin()).tanh()
            }
            ProfileSpec::CustomSeries {
                mean,
                ref cos,
                ref sin,
            } => {
                let mut v = mean;
                for (j, c) in cos.iter().enumerate() {
                    v += c * (PI * (j + 1) as f64 * x2).cos();
                }
                for (j, c) in sin.iter().enumerate() {
                    v += c * (PI * (j + 1) as f64 * x2).sin();
                }
                v
            }
        }
    }

    pub fn fprime(&self, x2: f64) -> f64 {
        match self.spec {
            ProfileSpec::Kolmogorov {
                amplitude,
                wavenumber,
            } => amplitude * PI * wavenumber * (PI * wavenumber * x2).cos(),
            ProfileSpec::SmoothedCouette { delta } => {
                let m = self.m as f64;
                let s = Self::corner_scale(delta, m);
                let x = self.reduce(x2);
                let r = std::f64::consts::SQRT_2 * s;
                -1.0 + libm::erf((x + m / 2.0) / r) - libm::erf((x - m / 2.0) / r)
            }
            ProfileSpec::TanhShear { steepness } => {
                let m = self.m as f64;
                let arg = PI * x2 / m;
                let sech = 1.0 / (steepness * m / PI * arg.sin()).cosh();
                steepness * sech * sech * arg.cos()
            }
            ProfileSpec::CustomSeries {
                ref cos, ref sin, ..
            } => {
                let mut v = 0.0;
                for (j, c) in cos.iter().enumerate() {
                    let k = PI * (j + 1) as f64;
                    v -= c * k * (k * x2).sin();
                }
                for (j, c) in sin.iter().enumerate() {
                    let k = PI * (j + 1) as f64;
                    v += c * k * (k * x2).cos();
                }
                v
            }
        }
    }

    pub fn fsecond(&self, x2: f64) -> f64 {
        match self.spec {
            ProfileSpec::Kolmogorov {
                amplitude,
                wavenumber,
            } => {
                let k = PI * wavenumber;
                -amplitude * k * k * (k * x2).sin()
            }
            ProfileSpec::SmoothedCouette { delta } => {
                let m = self.m as f64;
                let s = Self::corner_scale(delta, m);
                let x = self.reduce(x2);
                let g = |y: f64| (-(y * y) / (2.0 * s * s)).exp();
                SQRT_2_OVER_PI / s * (g(x + m / 2.0) - g(x - m / 2.0))
            }
            ProfileSpec::TanhShear { steepness } => {
                let m = self.m as f64;
                let arg = PI * x2 / m;
                let z = steepness * m / PI * arg.sin();
                let sech2 = 1.0 / z.cosh().powi(2);
                let c = arg.cos();
                steepness * sech2 * (-2.0 * z.tanh() * steepness * c * c - PI / m * arg.sin())
            }
            ProfileSpec::CustomSeries {
                ref cos, ref sin, ..
            } => {
                let mut v = 0.0;
                for (j, c) in cos.iter().enumerate() {
                    let k = PI * (j + 1) as f64;
                    v -= c * k * k * (k * x2).cos();
                }
                for (j, c) in sin.iter().enumerate() {
                    let k = PI * (j + 1) as f64;
                    v -= c * k * k * (k * x2).sin();
                }
                v
            }
        }
    }

    /// The `m -> infinity` limit `f` and its derivative.
    pub fn limit(&self, x2: f64) -> (f64, f64) {
        match self.spec {
            ProfileSpec::SmoothedCouette { .. } => (x2, 1.0),
            ProfileSpec::TanhShear { steepness } => {
                let t = (steepness * x2).tanh();
                (t, steepness * (1.0 - t * t))
            }
            ProfileSpec::Kolmogorov { .. } | ProfileSpec::CustomSeries { .. } => {
                (self.f(x2), self.fprime(x2))
            }
        }
    }

    fn compute_sup_fprime(&self) -> f64 {
        let h = self.half_period();
        let n = SUP_SAMPLES_PER_M * self.m;
        let dx = 2.0 * h / n as f64;
        let mut best = (0.0f64, 0usize);
        for i in 0..n {
            let v = self.fprime(-h + i as f64 * dx).abs();
            if v > best.0 {
                best = (v, i);
            }
        }
        let center = -h + best.1 as f64 * dx;
        let refined = golden_max(|x| self.fprime(x).abs(), center - dx, center + dx, 1e-13);
        best.0.max(refined)
    }

    /// Vorticity `-f_m'(x2)` of the shear and its mean velocity `(mean f_m, 0)`.
    pub fn vorticity(&self, grid: &TorusGrid) -> Result<(SpectralField, (f64, f64))> {
        if grid.m() != self.m {
            return Err(Error::Validation(format!(
                "profile built for m = {} used on a grid with m = {}",
                self.m,
                grid.m()
            )));
        }
        let column: Vec<f64> = (0..grid.n2()).map(|j| -self.fprime(grid.x2(j))).collect();
        let values: Vec<f64> = column
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, grid.n1()))
            .collect();
        let mut omega = SpectralField::from_values(grid, &values)?;
        let tail = omega.tail_peak_ratio();
        if tail > RESOLUTION_TAIL {
            return Err(Error::Resolution {
                family: self.family_name().to_string(),
                tail,
            });
        }
        omega.coeffs_mut()[0] = Default::default();
        let mean = (0..grid.n2()).map(|j| self.f(grid.x2(j))).sum::<f64>() / grid.n2() as f64;
        Ok((omega, (mean, 0.0)))
    }
}

/// Largest relative spectral tail of `f_m'` accepted by [`ShearProfile::vorticity`].
pub const RESOLUTION_TAIL: f64 = 1e-10;

/// `|y|` convolved with a centred Gaussian of standard deviation `s`.
fn smoothed_abs(y: f64, s: f64) -> f64 {
    y * libm::erf(y / (std::f64::consts::SQRT_2 * s))
        + s * SQRT_2_OVER_PI * (-(y * y) / (2.0 * s * s)).exp()
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    f(0.5 * (a + b)).max(fc).max(fd)
}

/// One row of the convergence table.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub m: usize,
    /// `sup_{-m/2 < x2 <= m/2} |f_m - f| + |f_m' - f'|`.
    pub gap: f64,
    /// The same supremum restricted to `|x2| <= (1-delta) m/2`, for the Couette family.
    pub interior_gap: Option<f64>,
    pub sup_fprime: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub family: String,
    pub rows: Vec<ConvergenceRow>,
    /// Whether `gap` strictly decreases along the `m` list (or is identically zero).
    pub decreasing: bool,
    /// Whether the last gap is within round-off of zero.
    pub vanishing: bool,
}

/// Tabulates the sup-gap to the limit profile for each `m`; a gap that fails
/// to decrease is reported, not raised.
pub fn check_profile_convergence(
    spec: &ProfileSpec,
    m_list: &[usize],
) -> Result<ConvergenceReport> {
    let mut rows = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let p = ShearProfile::new(spec.clone(), m)?;
        let half = m as f64 / 2.0;
        let n = 4096 * m;
        let gap_on = |lo: f64, hi: f64| {
            let mut worst = 0.0f64;
            for i in 1..=n {
                let x = lo + (hi - lo) * i as f64 / n as f64;
                let (f, fp) = p.limit(x);
                worst = worst.max((p.f(x) - f).abs() + (p.fprime(x) - fp).abs());
            }
            worst
        };
        let gap = gap_on(-half, half);
        let interior_gap = match *spec {
            ProfileSpec::SmoothedCouette { delta } => {
                let r = (1.0 - delta) * half;
                Some(gap_on(-r, r))
            }
            _ => None,
        };
        rows.push(ConvergenceRow {
            m,
            gap,
            interior_gap,
            sup_fprime: p.sup_fprime(),
        });
    }
    let zero = 1e-12;
    let decreasing = rows
        .windows(2)
        .all(|w| w[1].gap < w[0].gap || (w[0].gap <= zero && w[1].gap <= zero));
    let vanishing = rows.last().is_some_and(|r| r.gap <= zero);
    Ok(ConvergenceReport {
        family: spec.family_name().to_string(),
        rows,
        decreasing,
        vanishing,
    })
}
