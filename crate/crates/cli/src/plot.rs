//! Figures for a result bundle: one SVG per series kind.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use shear_core::harness::checks::indicator_series;
use shear_core::harness::{load_bundle, CellOutcome, ExperimentConfig, SeriesRow};

use crate::svg::{figure, Line, Panel, Scale};

type Getter = fn(&SeriesRow) -> f64;
type Kind = (
    &'static str,
    &'static str,
    &'static [(&'static str, Getter)],
);

/// Series kinds and the columns each one draws.
const KINDS: [Kind; 5] = [
    ("U", "||U(sigma,t)||", &[("U1", |r| r.u1), ("U2", |r| r.u2)]),
    (
        "dU",
        "||d_sigma U(0,t)||",
        &[("dU1", |r| r.du1), ("dU2", |r| r.du2)],
    ),
    (
        "J",
        "||J(t)||",
        &[("J", |r| r.j), ("J1", |r| r.j1), ("J2", |r| r.j2)],
    ),
    (
        "integrals",
        "running integrals of ||d_sigma U2||",
        &[("intU2", |r| r.int_u2), ("iintU2", |r| r.iint_u2)],
    ),
    (
        "energy",
        "energy and enstrophy",
        &[("energy", |r| r.energy), ("enstrophy", |r| r.enstrophy)],
    ),
];

fn pair(title: &str, y_label: &str, lines_lin: Vec<Line>, lines_log: Vec<Line>) -> [Panel; 2] {
    [
        Panel {
            title: format!("{title} (log-log)"),
            x_label: "<t>".into(),
            y_label: y_label.into(),
            x_scale: Scale::Log,
            y_scale: Scale::Log,
            lines: lines_log,
        },
        Panel {
            title: format!("{title} (linear)"),
            x_label: "t".into(),
            y_label: y_label.into(),
            x_scale: Scale::Linear,
            y_scale: Scale::Linear,
            lines: lines_lin,
        },
    ]
}

fn kind_figure(
    cells: &[&CellOutcome],
    kind: &str,
    y_label: &str,
    cols: &[(&str, Getter)],
) -> String {
    let (mut lin, mut log) = (Vec::new(), Vec::new());
    for c in cells {
        let Ok(r) = &c.result else { continue };
        for (name, get) in cols {
            let label = format!("{} {name}", c.name());
            lin.push(Line {
                label: label.clone(),
                points: r.series.rows.iter().map(|row| (row.t, get(row))).collect(),
            });
            log.push(Line {
                label,
                points: r
                    .series
                    .rows
                    .iter()
                    .map(|row| (row.t_bracket, get(row)))
                    .collect(),
            });
        }
    }
    figure(kind, &pair(kind, y_label, lin, log))
}

fn indicator_figure(cfg: &ExperimentConfig, cells: &[&CellOutcome]) -> Result<String> {
    let (mut lin, mut log) = (Vec::new(), Vec::new());
    for c in cells {
        let Ok(r) = &c.result else { continue };
        if c.sigma <= 0.0 {
            continue;
        }
        let d = indicator_series(&r.series, c.sigma, cfg.epsilon)?;
        let rows = &r.series.rows;
        lin.push(Line {
            label: c.name(),
            points: rows.iter().zip(&d).map(|(row, &v)| (row.t, v)).collect(),
        });
        log.push(Line {
            label: c.name(),
            points: rows
                .iter()
                .zip(&d)
                .map(|(row, &v)| (row.t_bracket, v))
                .collect(),
        });
    }
    Ok(figure(
        "indicator D(sigma,t)",
        &pair("D(sigma,t)", "D", lin, log),
    ))
}

/// Writes `<kind>.svg` files into `out_dir` and returns their paths.
pub fn plot_bundle(bundle: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let (cfg, cells) =
        load_bundle(bundle).with_context(|| format!("reading bundle {}", bundle.display()))?;
    let cells: Vec<&CellOutcome> = cells.iter().filter(|c| c.result.is_ok()).collect();
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut written = Vec::new();
    let mut save = |name: &str, svg: String| -> Result<()> {
        let path = out_dir.join(format!("{name}.svg"));
        std::fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
        Ok(())
    };
    for (kind, y_label, cols) in KINDS {
        save(kind, kind_figure(&cells, kind, y_label, cols))?;
    }
    save("indicator", indicator_figure(&cfg, &cells)?)?;
    Ok(written)
}
