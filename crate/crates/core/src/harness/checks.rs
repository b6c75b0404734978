//! Inequality checks over a [`PerturbationSeries`].
//!
//! Margins are relative: `(bound - value) / max(bound, value)` for upper
//! bounds and the mirror image for lower bounds, so they lie in `[-1, 1]` and
//! are negative exactly where the check fails. Samples where both sides vanish
//! are skipped.

use serde::{Deserialize, Serialize};

use super::series::{cumulative_trapezoid, PerturbationSeries};
use crate::error::{Error, Result};

/// One line of a cell's check report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub check_name: String,
    pub pass: bool,
    /// Sample time of the smallest margin (`None` if no sample was informative).
    pub worst_t: Option<f64>,
    pub margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckEntry {
    fn new(name: &str, worst: Option<(f64, f64)>) -> Self {
        let (worst_t, margin) = match worst {
            Some((t, m)) => (Some(t), m),
            None => (None, 0.0),
        };
        Self {
            check_name: name.to_owned(),
            pass: margin >= 0.0,
            worst_t,
            margin,
            note: None,
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Cell constants the checks need besides the series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckContext {
    pub sigma: f64,
    pub epsilon: f64,
    pub tau_d: f64,
    /// `||U_in||`.
    pub u_in_norm: f64,
    /// `sup |f'|` of the discrete shear.
    pub sup_fprime: f64,
    /// `||u0||` and `||u_inf||` of the nonlinear run.
    pub u0_norm: f64,
    pub u_inf_norm: f64,
}

fn relative_slack(bound: f64, value: f64) -> Option<f64> {
    let scale = bound.abs().max(value.abs());
    (scale > 0.0).then(|| (bound - value) / scale)
}

/// Smallest margin and its time over samples where it is defined.
fn worst(times: &[f64], margins: impl Iterator<Item = Option<f64>>) -> Option<(f64, f64)> {
    times
        .iter()
        .zip(margins)
        .filter_map(|(&t, m)| m.map(|m| (t, m)))
        .fold(None, |acc, (t, m)| match acc {
            Some((_, best)) if best <= m => acc,
            _ => Some((t, m)),
        })
}

/// `value <= bound` at every sample.
pub fn upper_bound_check(name: &str, times: &[f64], value: &[f64], bound: &[f64]) -> CheckEntry {
    let m = value.iter().zip(bound).map(|(&v, &b)| relative_slack(b, v));
    CheckEntry::new(name, worst(times, m))
}

/// `value >= bound` at every sample.
pub fn lower_bound_check(name: &str, times: &[f64], value: &[f64], bound: &[f64]) -> CheckEntry {
    let m = value.iter().zip(bound).map(|(&v, &b)| relative_slack(v, b));
    CheckEntry::new(name, worst(times, m))
}

/// `||J(t)|| >= factor ||U_in|| t` at every sample.
pub fn check_misiolek(s: &PerturbationSeries, u_in_norm: f64, factor: f64) -> CheckEntry {
    let t = s.times();
    let bound: Vec<f64> = t.iter().map(|t| factor * u_in_norm * t).collect();
    lower_bound_check("misiolek_c", &t, &s.column(|r| r.j), &bound)
}

/// Checks (a), (b), the loose form of (b), and (c), each at constant 1 with slack `tau_d`.
pub fn check_gronwall_chain(s: &PerturbationSeries, ctx: &CheckContext) -> Vec<CheckEntry> {
    let t = s.times();
    let slack = 1.0 + ctx.tau_d;
    let int_u1 = cumulative_trapezoid(&t, &s.column(|r| r.du1));
    let a_bound: Vec<f64> = s.rows.iter().map(|r| slack * r.int_u2).collect();
    let b_bound: Vec<f64> = s
        .rows
        .iter()
        .zip(&int_u1)
        .map(|(r, i1)| slack * (ctx.sup_fprime * r.iint_u2 + i1))
        .collect();
    let mut running_sup = 0.0f64;
    let b_loose: Vec<f64> = s
        .rows
        .iter()
        .map(|r| {
            running_sup = running_sup.max(r.du1);
            slack * (ctx.sup_fprime * r.iint_u2 + r.t * running_sup)
        })
        .collect();
    vec![
        upper_bound_check("gronwall_a", &t, &s.column(|r| r.j2), &a_bound),
        upper_bound_check("gronwall_b", &t, &s.column(|r| r.j1), &b_bound),
        upper_bound_check("gronwall_b_loose", &t, &s.column(|r| r.j1), &b_loose),
        check_misiolek(s, ctx.u_in_norm, 1.0 - ctx.tau_d),
    ]
}

/// `D(sigma, t) = max(||U1||/sigma, ||U2|| <t>^(1+eps) / sigma)` at every sample.
pub fn indicator_series(s: &PerturbationSeries, sigma: f64, epsilon: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::Validation(format!(
            "indicator needs sigma > 0, got {sigma}"
        )));
    }
    Ok(s.rows
        .iter()
        .map(|r| (r.u1 / sigma).max(r.u2 * r.t_bracket.powf(1.0 + epsilon) / sigma))
        .collect())
}

/// `(inf_t D, argmin t)`.
pub fn lower_bound_indicator(
    s: &PerturbationSeries,
    sigma: f64,
    epsilon: f64,
) -> Result<(f64, f64)> {
    let d = indicator_series(s, sigma, epsilon)?;
    s.times()
        .into_iter()
        .zip(d)
        .fold(None, |acc: Option<(f64, f64)>, (t, d)| match acc {
            Some((best, _)) if best <= d => acc,
            _ => Some((d, t)),
        })
        .ok_or_else(|| Error::Validation("empty series".into()))
}

/// Entry for `inf_t D > 0`; the margin is `inf_t D` itself.
pub fn indicator_entry(s: &PerturbationSeries, sigma: f64, epsilon: f64) -> Result<CheckEntry> {
    let (inf, t) = lower_bound_indicator(s, sigma, epsilon)?;
    Ok(CheckEntry {
        check_name: "lower_bound_indicator".into(),
        pass: inf > 0.0 && inf.is_finite(),
        worst_t: Some(t),
        margin: inf,
        note: None,
    })
}

/// At least one of `inf_t D > 0` and a failed check (c) must hold.
pub fn disjunction(indicator: &CheckEntry, misiolek: &CheckEntry) -> CheckEntry {
    let bounded = indicator.pass;
    let violated = !misiolek.pass;
    CheckEntry {
        check_name: "disjunction".into(),
        pass: bounded || violated,
        worst_t: indicator.worst_t,
        margin: if bounded {
            indicator.margin
        } else if violated {
            -misiolek.margin
        } else {
            -1.0
        },
        note: Some(match (bounded, violated) {
            (true, true) => "D bounded below and check (c) violated".into(),
            (true, false) => "D bounded below".into(),
            (false, true) => "check (c) violated".into(),
            (false, false) => "neither D bounded below nor check (c) violated".into(),
        }),
    }
}

/// `||U(sigma, t)|| >= | ||u0|| - ||u_inf|| | - 1e-9` at every sample; the margin is absolute.
pub fn check_energy_floor(s: &PerturbationSeries, u0_norm: f64, u_inf_norm: f64) -> CheckEntry {
    let floor = (u0_norm - u_inf_norm).abs();
    let m = s.rows.iter().map(|r| Some(r.u() - floor + 1e-9));
    let entry = CheckEntry::new("energy_floor", worst(&s.times(), m));
    if floor <= 1e-9 {
        entry.with_note(format!(
            "floor {floor:.3e} is below the 1e-9 allowance; check is vacuous"
        ))
    } else {
        entry.with_note(format!("floor {floor:.6e}"))
    }
}

/// `||U(0, t)|| <= 1e-9` at every sample (the unperturbed cell); absolute margin.
pub fn check_stationarity(s: &PerturbationSeries) -> CheckEntry {
    let m = s.rows.iter().map(|r| Some(1e-9 - r.u()));
    CheckEntry::new("stationarity", worst(&s.times(), m))
}

/// `K = max_t | ||U||/sigma - ||dU|| | / sigma`, the sigma-collapse constant of one cell.
pub fn collapse_constant(s: &PerturbationSeries, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Validation(format!(
            "collapse needs sigma > 0, got {sigma}"
        )));
    }
    Ok(s.rows
        .iter()
        .map(|r| (r.u() / sigma - r.du()).abs() / sigma)
        .fold(0.0, f64::max))
}

/// All cell checks. `sigma = 0` cells get the stationarity check in place of the
/// indicator and disjunction.
pub fn run_checks(s: &PerturbationSeries, ctx: &CheckContext) -> Result<Vec<CheckEntry>> {
    let mut out = check_gronwall_chain(s, ctx);
    if ctx.sigma > 0.0 {
        let ind = indicator_entry(s, ctx.sigma, ctx.epsilon)?;
        let dis = disjunction(&ind, &out[3]);
        out.push(ind);
        out.push(dis);
    } else {
        out.push(check_stationarity(s));
    }
    out.push(check_energy_floor(s, ctx.u0_norm, ctx.u_inf_norm));
    Ok(out)
}
