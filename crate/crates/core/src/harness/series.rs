//! Per-cell time series of perturbation, linearized and Jacobi norms.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column names of the series CSV, in order.
pub const CSV_HEADER: [&str; 13] = [
    "t",
    "t_bracket",
    "U1",
    "U2",
    "dU1",
    "dU2",
    "J",
    "J1",
    "J2",
    "intU2",
    "iintU2",
    "energy",
    "enstrophy",
];

/// The Japanese bracket `(1 + t^2)^(1/2)`.
pub fn bracket(t: f64) -> f64 {
    t.hypot(1.0)
}

/// One sample of a [`PerturbationSeries`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub t_bracket: f64,
    /// `||U1(sigma, t)||` of the nonlinear run minus the shear.
    #[serde(rename = "U1")]
    pub u1: f64,
    #[serde(rename = "U2")]
    pub u2: f64,
    /// `||dU1(0, t)||` of the linearized run.
    #[serde(rename = "dU1")]
    pub du1: f64,
    #[serde(rename = "dU2")]
    pub du2: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "J1")]
    pub j1: f64,
    #[serde(rename = "J2")]
    pub j2: f64,
    /// `int_0^t ||dU2||`.
    #[serde(rename = "intU2")]
    pub int_u2: f64,
    /// `int_0^t int_0^s ||dU2||`.
    #[serde(rename = "iintU2")]
    pub iint_u2: f64,
    pub energy: f64,
    pub enstrophy: f64,
}

impl SeriesRow {
    /// `||U(sigma, t)||`.
    pub fn u(&self) -> f64 {
        self.u1.hypot(self.u2)
    }

    /// `||dU(0, t)||`.
    pub fn du(&self) -> f64 {
        self.du1.hypot(self.du2)
    }
}

/// Running trapezoid integral of `y` over `t`, starting from 0.
pub fn cumulative_trapezoid(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    for i in 0..t.len() {
        if i > 0 {
            acc += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// Raw per-sample norms before the running integrals are formed.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SampleNorms {
    pub t: f64,
    pub u: (f64, f64),
    pub du: (f64, f64),
    pub j: (f64, f64),
    pub energy: f64,
    pub enstrophy: f64,
}

/// Time series for one `(m, sigma)` cell.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PerturbationSeries {
    pub rows: Vec<SeriesRow>,
}

impl PerturbationSeries {
    pub fn from_samples(samples: &[SampleNorms]) -> Result<Self> {
        if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::Validation(
                "series times must increase strictly".into(),
            ));
        }
        let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
        let du2: Vec<f64> = samples.iter().map(|s| s.du.1).collect();
        let int_u2 = cumulative_trapezoid(&t, &du2);
        let iint_u2 = cumulative_trapezoid(&t, &int_u2);
        let rows = samples
            .iter()
            .enumerate()
            .map(|(i, s)| SeriesRow {
                t: s.t,
                t_bracket: bracket(s.t),
                u1: s.u.0,
                u2: s.u.1,
                du1: s.du.0,
                du2: s.du.1,
                j: s.j.0.hypot(s.j.1),
                j1: s.j.0,
                j2: s.j.1,
                int_u2: int_u2[i],
                iint_u2: iint_u2[i],
                energy: s.energy,
                enstrophy: s.enstrophy,
            })
            .collect();
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.column(|r| r.t)
    }

    pub fn column(&self, f: impl Fn(&SeriesRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        if self.rows.is_empty() {
            wr.write_record(CSV_HEADER)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv(r: impl Read) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
        if header != CSV_HEADER {
            return Err(Error::Validation(format!(
                "series header must be `{}`, got `{}`",
                CSV_HEADER.join(","),
                header.join(",")
            )));
        }
        let rows = rd
            .deserialize()
            .collect::<std::result::Result<Vec<SeriesRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
