//! Standalone SVG line charts with error bars for sweep results.

use std::fmt::Write;

use crate::state::SweepResult;

/// Labels and axis options for [`sweep_chart`].
#[derive(Clone, Debug, Default)]
pub struct ChartOptions {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    /// Free text placed in a `<metadata>` element (escaped).
    pub metadata: Option<String>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick(x: f64) -> String {
    if x.abs() >= 100.0 || x == x.trunc() {
        format!("{x:.0}")
    } else if x.abs() >= 1.0 {
        format!("{x:.1}")
    } else {
        format!("{x:.3}")
    }
}

/// Renders mean phi against the swept parameter, with ±1 standard error bars and the maximum
/// marked. Points with a non-finite mean are skipped.
pub fn sweep_chart(sweep: &SweepResult, options: &ChartOptions) -> String {
    let points: Vec<(f64, f64, f64)> = sweep
        .parameter_values
        .iter()
        .zip(&sweep.mean_phi)
        .zip(&sweep.stderr_phi)
        .filter(|((p, m), _)| m.is_finite() && (!options.log_x || **p > 0.0))
        .map(|((p, m), s)| (*p, *m, if s.is_finite() { *s } else { 0.0 }))
        .collect();
    let fx = |x: f64| if options.log_x { x.log10() } else { x };
    let (mut x0, mut x1) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(fx(p.0)), b.max(fx(p.0))));
    let (mut y0, mut y1) = points
        .iter()
        .fold((0.0f64, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1 - p.2), b.max(p.1 + p.2)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if !y1.is_finite() || y1 <= y0 {
        y1 = y0 + 1.0;
    }
    y1 += 0.05 * (y1 - y0);
    if y0 < 0.0 {
        y0 -= 0.05 * (y1 - y0);
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (fx(x) - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    if let Some(meta) = &options.metadata {
        let _ = writeln!(svg, "<metadata>{}</metadata>", escape(meta));
    }
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(&options.title)
    );
    let (bottom, right) = (MARGIN_TOP + plot_h, MARGIN_LEFT + plot_w);
    let _ = writeln!(
        svg,
        r#"<path d="M{MARGIN_LEFT},{MARGIN_TOP} V{bottom} H{right}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let y = y0 + (y1 - y0) * f64::from(i) / 4.0;
        let py = sy(y);
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{py:.2}" x2="{MARGIN_LEFT}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text><line x1="{MARGIN_LEFT}" y1="{py:.2}" x2="{right}" y2="{py:.2}" stroke="#ddd"/>"##,
            MARGIN_LEFT - 4.0,
            MARGIN_LEFT - 7.0,
            py + 4.0,
            tick(y)
        );
    }
    for &(x, _, _) in &points {
        let px = sx(x);
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{bottom}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            bottom + 4.0,
            bottom + 17.0,
            tick(x)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 14.0,
        escape(&options.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(&options.y_label)
    );
    if !points.is_empty() {
        let path: Vec<String> = points
            .iter()
            .enumerate()
            .map(|(i, p)| format!("{}{:.2},{:.2}", if i == 0 { "M" } else { "L" }, sx(p.0), sy(p.1)))
            .collect();
        let _ = writeln!(svg, r##"<path d="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##, path.join(" "));
    }
    for &(x, m, s) in &points {
        let (px, lo, hi) = (sx(x), sy(m - s), sy(m + s));
        let _ = writeln!(
            svg,
            r##"<path d="M{px:.2},{lo:.2} V{hi:.2} M{:.2},{lo:.2} H{:.2} M{:.2},{hi:.2} H{:.2}" stroke="#1f77b4"/><circle cx="{px:.2}" cy="{:.2}" r="3.5" fill="{}"/>"##,
            px - 4.0,
            px + 4.0,
            px - 4.0,
            px + 4.0,
            sy(m),
            if x == sweep.argmax { "#d62728" } else { "#1f77b4" }
        );
    }
    svg.push_str("</svg>\n");
    svg
}
