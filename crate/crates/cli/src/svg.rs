//! Minimal self-contained SVG line charts.

use std::fmt::Write;

const PANEL_W: f64 = 520.0;
const PANEL_H: f64 = 380.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const LEGEND_W: f64 = 200.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

impl Scale {
    fn map(self, v: f64) -> f64 {
        match self {
            Scale::Linear => v,
            Scale::Log => v.log10(),
        }
    }

    fn admits(self, v: f64) -> bool {
        v.is_finite() && (self == Scale::Linear || v > 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct Line {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub lines: Vec<Line>,
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if (1e-3..1e4).contains(&v.abs()) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.0e}")
    }
}

/// Ticks at 1, 2 or 5 times a power of ten, in mapped coordinates.
fn linear_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|s| s * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last)
        .map(|i| {
            let v = i as f64 * step;
            (v, fmt_tick(v))
        })
        .collect()
}

fn log_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let (a, b) = (lo.ceil() as i64, hi.floor() as i64);
    if b - a < 2 {
        let mut out = Vec::new();
        for e in lo.floor() as i64..=hi.ceil() as i64 {
            for mant in [1.0, 2.0, 5.0] {
                let v = mant * 10f64.powi(e as i32);
                let lv = v.log10();
                if (lo..=hi).contains(&lv) {
                    out.push((lv, fmt_tick(v)));
                }
            }
        }
        return out;
    }
    let stride = ((b - a) / 6 + 1).max(1);
    (a..=b)
        .filter(|e| (e - a) % stride == 0)
        .map(|e| (e as f64, format!("1e{e}")))
        .collect()
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return None;
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        Some((lo - 0.5, hi + 0.5))
    } else {
        let pad = 0.03 * (hi - lo);
        Some((lo - pad, hi + pad))
    }
}

fn render_panel(out: &mut String, p: &Panel, ox: f64) {
    let (x0, y0) = (ox + MARGIN_L, MARGIN_T);
    let (w, h) = (PANEL_W - MARGIN_L - MARGIN_R, PANEL_H - MARGIN_T - MARGIN_B);
    let lines: Vec<Vec<(f64, f64)>> = p
        .lines
        .iter()
        .map(|l| {
            l.points
                .iter()
                .filter(|(x, y)| p.x_scale.admits(*x) && p.y_scale.admits(*y))
                .map(|&(x, y)| (p.x_scale.map(x), p.y_scale.map(y)))
                .collect()
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"#,
        x0 + w / 2.0,
        MARGIN_T - 15.0,
        escape(&p.title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{x0:.1}" y="{y0:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#333"/>"##
    );
    let xr = range(lines.iter().flatten().map(|p| p.0));
    let yr = range(lines.iter().flatten().map(|p| p.1));
    let (Some((xl, xh)), Some((yl, yh))) = (xr, yr) else {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">no data</text>"#,
            x0 + w / 2.0,
            y0 + h / 2.0
        );
        return;
    };
    let sx = |v: f64| x0 + (v - xl) / (xh - xl) * w;
    let sy = |v: f64| y0 + h - (v - yl) / (yh - yl) * h;
    let ticks = |scale: Scale, lo: f64, hi: f64| match scale {
        Scale::Linear => linear_ticks(lo, hi),
        Scale::Log => log_ticks(lo, hi),
    };
    for (v, label) in ticks(p.x_scale, xl, xh) {
        let x = sx(v);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"##,
            y0,
            y0 + h,
            y0 + h + 15.0,
            escape(&label)
        );
    }
    for (v, label) in ticks(p.y_scale, yl, yh) {
        let y = sy(v);
        let _ = writeln!(
            out,
            r##"<line x1="{x0:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"##,
            x0 + w,
            x0 - 5.0,
            y + 4.0,
            escape(&label)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#,
        x0 + w / 2.0,
        PANEL_H - 12.0,
        escape(&p.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
        ox + 16.0,
        y0 + h / 2.0,
        ox + 16.0,
        y0 + h / 2.0,
        escape(&p.y_label)
    );
    for (i, pts) in lines.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            path.join(" ")
        );
    }
}

/// A row of panels sharing one legend (taken from the first panel's lines).
pub fn figure(title: &str, panels: &[Panel]) -> String {
    let width = PANEL_W * panels.len() as f64 + LEGEND_W;
    let entries = panels.first().map_or(0, |p| p.lines.len());
    let height = PANEL_H.max(MARGIN_T + 18.0 * entries as f64 + 20.0) + 30.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<g transform="translate(0,30)">"#);
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut out, p, PANEL_W * i as f64);
    }
    if let Some(p) = panels.first() {
        let lx = PANEL_W * panels.len() as f64 + 10.0;
        for (i, l) in p.lines.iter().enumerate() {
            let y = MARGIN_T + 18.0 * i as f64;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
                lx + 20.0,
                PALETTE[i % PALETTE.len()],
                lx + 26.0,
                y + 4.0,
                escape(&l.label)
            );
        }
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="16">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(scale: Scale, points: Vec<(f64, f64)>) -> Panel {
        Panel {
            title: "a < b & c".into(),
            x_label: "t".into(),
            y_label: "y".into(),
            x_scale: scale,
            y_scale: scale,
            lines: vec![Line {
                label: "series \"one\"".into(),
                points,
            }],
        }
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(
            escape(r#"<a href="x">&'"#),
            "&lt;a href=&quot;x&quot;&gt;&amp;&apos;"
        );
    }

    #[test]
    fn linear_ticks_are_round_numbers() {
        let t = linear_ticks(0.0, 1.0);
        let v: Vec<f64> = t.iter().map(|x| x.0).collect();
        assert_eq!(v.len(), 6);
        assert!((v[1] - 0.2).abs() < 1e-12);
        assert_eq!(t[1].1, "0.2");
    }

    #[test]
    fn log_ticks_are_decades() {
        let t = log_ticks(-3.2, 1.5);
        assert_eq!(
            t.iter().map(|x| x.1.as_str()).collect::<Vec<_>>(),
            ["1e-3", "1e-2", "1e-1", "1e0", "1e1"]
        );
    }

    #[test]
    fn short_log_ranges_get_intermediate_ticks() {
        let t = log_ticks(0.0, 30f64.log10());
        assert_eq!(
            t.iter().map(|x| x.1.as_str()).collect::<Vec<_>>(),
            ["1", "2", "5", "10", "20"]
        );
    }

    #[test]
    fn log_panel_drops_nonpositive_points() {
        let svg = figure(
            "f",
            &[panel(
                Scale::Log,
                vec![(0.0, 1.0), (1.0, -1.0), (1.0, 1.0), (10.0, 0.1)],
            )],
        );
        let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let pts = poly.split("points=\"").nth(1).unwrap();
        assert_eq!(pts.split_whitespace().count(), 2);
    }

    #[test]
    fn empty_panel_says_so() {
        let svg = figure("f", &[panel(Scale::Log, vec![(0.0, 0.0)])]);
        assert!(svg.contains("no data"));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
