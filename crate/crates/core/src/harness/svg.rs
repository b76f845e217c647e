//! Minimal SVG line plot with a log-scale y axis.

use std::fmt::Write;

pub struct PlotSeries {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const MAX_POINTS: usize = 2000;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders `y` on a log10 axis against linear `x`. Nonpositive or non-finite
/// values break the polyline.
pub fn render_log_plot(series: &[PlotSeries], x_label: &str, y_label: &str) -> String {
    let finite_pos = |v: &f64| v.is_finite() && *v > 0.0;
    let ys = series.iter().flat_map(|s| s.y.iter().copied().filter(finite_pos));
    let (ymin, ymax) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let xs = series.iter().flat_map(|s| s.x.iter().copied().filter(|v| v.is_finite()));
    let (xmin, xmax) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (mut dlo, mut dhi) = if ymin.is_finite() { (ymin.log10().floor(), ymax.log10().ceil()) } else { (-1.0, 0.0) };
    if dhi <= dlo {
        dhi = dlo + 1.0;
    }
    dlo = dlo.max(dhi - 40.0);
    let (xmin, xmax) = if xmin.is_finite() && xmax > xmin { (xmin, xmax) } else { (0.0, 1.0) };

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - xmin) / (xmax - xmin) * pw;
    let py = |y: f64| TOP + (dhi - y.log10().clamp(dlo, dhi)) / (dhi - dlo) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);

    let step = ((dhi - dlo) / 10.0).ceil().max(1.0);
    let mut d = dlo;
    while d <= dhi {
        let y = TOP + (dhi - d) / (dhi - dlo) * ph;
        let _ = writeln!(out, r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"#, LEFT - 6.0, y + 4.0);
        d += step;
    }
    for i in 0..=5 {
        let xv = xmin + (xmax - xmin) * i as f64 / 5.0;
        let x = px(xv);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, tick(xv));
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let stride = (s.x.len() / MAX_POINTS).max(1);
        let mut segment = Vec::new();
        let flush = |seg: &mut Vec<String>, out: &mut String| {
            if seg.len() > 1 {
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    seg.join(" ")
                );
            }
            seg.clear();
        };
        for (j, (&x, &y)) in s.x.iter().zip(&s.y).enumerate() {
            if j % stride != 0 && j + 1 != s.x.len() {
                continue;
            }
            if finite_pos(&y) && x.is_finite() {
                segment.push(format!("{:.2},{:.2}", px(x), py(y)));
            } else {
                flush(&mut segment, &mut out);
            }
        }
        flush(&mut segment, &mut out);
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

fn tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-2 && v.abs() < 1e5) {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}
