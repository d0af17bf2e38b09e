//! Minimal static SVG charts.

use std::fmt::Write as _;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const WIDTH: f64 = 760.0;
const PANEL_HEIGHT: f64 = 260.0;
const MARGIN_L: f64 = 90.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;
/// Longest polyline drawn per curve; longer curves are decimated.
const MAX_POINTS: usize = 4000;

pub const TIME_LABEL: &str = "t (a.u.; 1 a.u. = 2.42e-17 s)";

#[derive(Debug, Clone)]
pub struct Curve {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub curves: Vec<Curve>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-300_f64.max(1e-12 * hi.abs().max(lo.abs())) {
        let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e-2 && v.abs() < 1e4 {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn panel_svg(out: &mut String, panel: &Panel, top: f64) {
    let (x0, x1) = range(panel.curves.iter().flat_map(|c| c.x.iter().copied()));
    let (y0, y1) = range(panel.curves.iter().flat_map(|c| c.y.iter().copied()));
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = PANEL_HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN_L}" y="{}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##,
        top + MARGIN_T
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_L + pw / 2.0,
        top + MARGIN_T - 10.0,
        escape(&panel.title)
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">{}</text>"#,
            sx(xv),
            top + MARGIN_T + ph + 16.0,
            label(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" font-size="11">{}</text>"#,
            MARGIN_L - 6.0,
            sy(yv) + 4.0,
            label(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        MARGIN_L + pw / 2.0,
        top + PANEL_HEIGHT - 8.0,
        escape(&panel.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {0})">{1}</text>"#,
        top + MARGIN_T + ph / 2.0,
        escape(&panel.y_label)
    );
    for (k, c) in panel.curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let step = c.x.len().div_ceil(MAX_POINTS).max(1);
        let points: Vec<String> = c
            .x
            .iter()
            .zip(&c.y)
            .step_by(step)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            MARGIN_L + 8.0,
            top + MARGIN_T + 14.0 + 14.0 * k as f64,
            escape(&c.label)
        );
    }
}

fn document(height: f64, caption: &str, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" \
         viewBox=\"0 0 {WIDTH} {height}\" font-family=\"sans-serif\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <desc>{}</desc>\n{body}</svg>\n",
        escape(caption)
    )
}

/// Stacked line-chart panels sharing the figure width.
pub fn line_chart(panels: &[Panel], caption: &str) -> String {
    let mut body = String::new();
    for (i, p) in panels.iter().enumerate() {
        panel_svg(&mut body, p, i as f64 * PANEL_HEIGHT);
    }
    document(PANEL_HEIGHT * panels.len() as f64, caption, &body)
}

pub fn bar_chart(title: &str, labels: &[String], values: &[f64], caption: &str) -> String {
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = PANEL_HEIGHT - MARGIN_T - MARGIN_B;
    let max = values.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let mut body = String::new();
    let _ = writeln!(
        body,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        body,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_L + pw / 2.0,
        escape(title)
    );
    let n = values.len().max(1) as f64;
    let slot = pw / n;
    for (i, (l, v)) in labels.iter().zip(values).enumerate() {
        let h = (v / max).clamp(0.0, 1.0) * ph;
        let x = MARGIN_L + slot * i as f64 + 0.15 * slot;
        let _ = writeln!(
            body,
            r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{}"/>"#,
            MARGIN_T + ph - h,
            0.7 * slot,
            COLORS[0]
        );
        let _ = writeln!(
            body,
            r#"<text x="{:.2}" y="{}" text-anchor="middle" font-size="11">{}</text>"#,
            x + 0.35 * slot,
            MARGIN_T + ph + 16.0,
            escape(l)
        );
        let _ = writeln!(
            body,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
            x + 0.35 * slot,
            MARGIN_T + ph - h - 4.0,
            label(*v)
        );
    }
    document(PANEL_HEIGHT, caption, &body)
}
