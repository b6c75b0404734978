//! Power-law decay fits `||.|| ~ C <t>^alpha`.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::series::{bracket, PerturbationSeries, SeriesRow};
use crate::error::{Error, Result};

/// Smallest norm accepted by a fit.
pub const FIT_FLOOR: f64 = 1e-14;
/// Fewest samples a fit window may hold.
pub const FIT_MIN_SAMPLES: usize = 8;

/// Series column a decay fit can target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesField {
    U1,
    U2,
    #[serde(rename = "dU1")]
    DU1,
    #[serde(rename = "dU2")]
    DU2,
    J,
    J1,
    J2,
}

impl SeriesField {
    pub const ALL: [SeriesField; 7] = [
        SeriesField::U1,
        SeriesField::U2,
        SeriesField::DU1,
        SeriesField::DU2,
        SeriesField::J,
        SeriesField::J1,
        SeriesField::J2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SeriesField::U1 => "U1",
            SeriesField::U2 => "U2",
            SeriesField::DU1 => "dU1",
            SeriesField::DU2 => "dU2",
            SeriesField::J => "J",
            SeriesField::J1 => "J1",
            SeriesField::J2 => "J2",
        }
    }

    pub fn get(self, r: &SeriesRow) -> f64 {
        match self {
            SeriesField::U1 => r.u1,
            SeriesField::U2 => r.u2,
            SeriesField::DU1 => r.du1,
            SeriesField::DU2 => r.du2,
            SeriesField::J => r.j,
            SeriesField::J1 => r.j1,
            SeriesField::J2 => r.j2,
        }
    }
}

impl FromStr for SeriesField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|f| f.name()).collect();
                Error::Fit(format!(
                    "unknown field `{s}`; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Least-squares fit of `log y = log C + alpha log <t>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub alpha: f64,
    pub log_prefactor: f64,
    /// Root-mean-square residual in `log y`.
    pub residual: f64,
    pub samples: usize,
}

/// Fits samples with `t` in the closed `window`.
pub fn fit_power_law(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let (ta, tb) = window;
    if !(ta >= 0.0 && tb > ta) {
        return Err(Error::Fit(format!("degenerate window [{ta}, {tb}]")));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(&t, _)| t >= ta && t <= tb)
        .map(|(&t, &y)| (t, y))
        .collect();
    if pts.len() < FIT_MIN_SAMPLES {
        return Err(Error::Fit(format!(
            "window [{ta}, {tb}] holds {} samples, need at least {FIT_MIN_SAMPLES}",
            pts.len()
        )));
    }
    if let Some(&(t, y)) = pts.iter().find(|(_, y)| !(*y > FIT_FLOOR)) {
        return Err(Error::Fit(format!(
            "norm {y:e} at t = {t} is below the fit floor {FIT_FLOOR:e}"
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|(t, _)| bracket(*t).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, y)| y.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit(format!(
            "window [{ta}, {tb}] spans a single time"
        )));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let alpha = sxy / sxx;
    let c = my - alpha * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - c - alpha * x).powi(2))
        .sum();
    Ok(DecayFit {
        alpha,
        log_prefactor: c,
        residual: (ss / n).sqrt(),
        samples: pts.len(),
    })
}

pub fn fit_decay(
    s: &PerturbationSeries,
    field: SeriesField,
    window: (f64, f64),
) -> Result<DecayFit> {
    fit_power_law(&s.times(), &s.column(|r| field.get(r)), window)
}
