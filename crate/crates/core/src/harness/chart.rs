//! Minimal static SVG line charts: one mean line and shaded interval band
//! per series. Output depends only on the inputs.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::summary::SummaryRow;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
/// Points drawn per series at most; longer series are strided.
const MAX_POINTS: usize = 500;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone)]
pub struct ChartSeries {
    pub label: String,
    pub rows: Vec<SummaryRow>,
}

fn thin(rows: &[SummaryRow]) -> Vec<SummaryRow> {
    if rows.len() <= MAX_POINTS {
        return rows.to_vec();
    }
    let stride = rows.len().div_ceil(MAX_POINTS);
    let mut out: Vec<SummaryRow> = rows.iter().step_by(stride).copied().collect();
    if out.last().map(|r| r.episode) != rows.last().map(|r| r.episode) {
        out.push(*rows.last().expect("non-empty"));
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the chart as an SVG document.
pub fn render_chart(title: &str, series: &[ChartSeries]) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.rows.is_empty()) {
        return Err(Error::Empty("chart series"));
    }
    let thinned: Vec<Vec<SummaryRow>> = series.iter().map(|s| thin(&s.rows)).collect();
    let all = thinned.iter().flatten();
    let (mut x_max, mut y_min, mut y_max) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for r in all {
        x_max = x_max.max(r.episode as f64);
        y_min = y_min.min(r.ci_low);
        y_max = y_max.max(r.ci_high);
    }
    if !(y_min.is_finite() && y_max.is_finite()) {
        return Err(Error::Config("chart values must be finite".into()));
    }
    if y_max - y_min < 1e-9 {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let x_max = x_max.max(1.0);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + x / x_max * plot_w;
    let py = |y: f64| MARGIN_TOP + (y_max - y) / (y_max - y_min) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );
    // Axes with five ticks each.
    let _ = writeln!(
        s,
        r#"<path class="axes" d="M{l:.1},{t:.1} V{b:.1} H{r:.1}" fill="none" stroke="black"/>"#,
        l = MARGIN_LEFT,
        t = MARGIN_TOP,
        b = MARGIN_TOP + plot_h,
        r = MARGIN_LEFT + plot_w
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = f * x_max;
        let yv = y_min + f * (y_max - y_min);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.0}</text>"#,
            px(xv),
            MARGIN_TOP + plot_h + 18.0,
            xv
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.2}</text>"#,
            MARGIN_LEFT - 6.0,
            py(yv) + 4.0,
            yv
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">episode</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18,{:.1}) rotate(-90)" text-anchor="middle">team reward</text>"#,
        MARGIN_TOP + plot_h / 2.0
    );

    for (k, (meta, rows)) in series.iter().zip(&thinned).enumerate() {
        if rows.is_empty() {
            continue;
        }
        let color = PALETTE[k % PALETTE.len()];
        // Band: upper edge forward, lower edge back. A single point becomes a
        // short vertical bar.
        let mut band = String::new();
        for (i, r) in rows.iter().enumerate() {
            let _ = write!(
                band,
                "{}{:.2},{:.2} ",
                if i == 0 { "M" } else { "L" },
                px(r.episode as f64),
                py(r.ci_high)
            );
        }
        for r in rows.iter().rev() {
            let _ = write!(band, "L{:.2},{:.2} ", px(r.episode as f64), py(r.ci_low));
        }
        let _ = writeln!(
            s,
            r#"<path class="band" d="{}Z" fill="{color}" fill-opacity="0.2" stroke="{}"/>"#,
            band,
            if rows.len() == 1 { color } else { "none" }
        );
        if rows.len() == 1 {
            let r = rows[0];
            let _ = writeln!(
                s,
                r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                px(r.episode as f64),
                py(r.mean)
            );
        } else {
            let points: Vec<String> = rows
                .iter()
                .map(|r| format!("{:.2},{:.2}", px(r.episode as f64), py(r.mean)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline class="mean" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                points.join(" ")
            );
        }
        let ly = MARGIN_TOP + 10.0 + 20.0 * k as f64;
        let lx = WIDTH - MARGIN_RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{:.1}" width="14" height="4" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            ly - 2.0,
            lx + 20.0,
            ly + 4.0,
            escape(&meta.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Renders and writes the chart. Nothing is written on error.
pub fn emit_chart(title: &str, series: &[ChartSeries], output_path: &Path) -> Result<()> {
    let svg = render_chart(title, series)?;
    std::fs::write(output_path, svg).map_err(|e| Error::io(output_path, e))
}
