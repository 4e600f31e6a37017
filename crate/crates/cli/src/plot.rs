//! Static SVG charts: EDC line plots and a bar chart of average PAUC.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Maps data coordinates into the plot area; y grows upwards.
struct Frame {
    x_max: f64,
    y_max: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + x / self.x_max * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - y / self.y_max * (HEIGHT - 2.0 * MARGIN)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str, x_ticks: bool) {
    let (x0, y0, x1, y1) = (f.px(0.0), f.py(0.0), f.px(f.x_max), f.py(f.y_max));
    let _ = writeln!(out, r#"<path d="M{x0:.1},{y1:.1} V{y0:.1} H{x1:.1}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let v = f.y_max * k as f64 / 4.0;
        let y = f.py(v);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.3}</text>"#, x0 - 6.0, y + 4.0);
        if x_ticks {
            let xv = f.x_max * k as f64 / 4.0;
            let _ =
                writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xv:.2}</text>"#, f.px(xv), y0 + 16.0);
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
}

fn nice_max(v: f64) -> f64 {
    if v > 0.0 && v.is_finite() {
        v * 1.1
    } else {
        1.0
    }
}

/// One named `(x, y)` polyline per entry.
pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Line chart with a legend; the x axis spans `[0, x_max]`.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, x_max: f64, series: &[Series]) -> String {
    let y_top = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).fold(0.0, f64::max);
    let f = Frame { x_max, y_max: nice_max(y_top) };
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, x_label, y_label, true);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> =
            s.points.iter().filter(|p| p.0 <= x_max).map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
        let _ =
            writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
        let ly = MARGIN + 16.0 * i as f64;
        let lx = WIDTH - MARGIN - 120.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Bars of `(name, mean, std)` with ±std whiskers.
pub fn bar_chart(title: &str, y_label: &str, bars: &[(&str, f64, f64)]) -> String {
    let y_top = bars.iter().map(|b| b.1 + b.2.max(0.0)).fold(0.0, f64::max);
    let n = bars.len().max(1) as f64;
    let f = Frame { x_max: n, y_max: nice_max(y_top) };
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, "quality algorithm", y_label, false);
    let slot = (WIDTH - 2.0 * MARGIN) / n;
    for (i, &(name, mean, std)) in bars.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let x = f.px(i as f64) + 0.2 * slot;
        let (top, base) = (f.py(mean), f.py(0.0));
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
            0.6 * slot,
            base - top
        );
        let cx = x + 0.3 * slot;
        let (lo, hi) = (f.py((mean - std).max(0.0)), f.py(mean + std));
        let _ = writeln!(
            out,
            r#"<path d="M{cx:.2},{lo:.2} V{hi:.2} M{:.2},{hi:.2} H{:.2} M{:.2},{lo:.2} H{:.2}" stroke="black" fill="none"/>"#,
            cx - 6.0,
            cx + 6.0,
            cx - 6.0,
            cx + 6.0
        );
        let _ =
            writeln!(out, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, base + 16.0, escape(name));
    }
    out.push_str("</svg>\n");
    out
}
