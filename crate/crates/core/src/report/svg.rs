//! Minimal SVG line and radar charts.

use std::f64::consts::PI;
use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

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

/// Insert a `<desc>` element right after the opening `<svg>` tag.
pub fn with_desc(svg: &str, desc: &str) -> String {
    match svg.find("<svg").and_then(|i| svg[i..].find('>').map(|j| i + j + 1)) {
        Some(at) => format!("{}\n<desc>{}</desc>{}", &svg[..at], escape(desc), &svg[at..]),
        None => svg.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn header(title: &str, width: f64, height: f64) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        width / 2.0,
        escape(title)
    )
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[LineSeries]) -> String {
    let mut s = header(title, WIDTH, HEIGHT);
    let (x0, x1) = bounds(series.iter().flat_map(|l| l.points.iter().map(|p| p.0)));
    let (y0, y1) = bounds(series.iter().flat_map(|l| l.points.iter().map(|p| p.1)));
    let plot_w = WIDTH - 2.0 * MARGIN - 100.0;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * plot_h;
    let _ = writeln!(
        s,
        "<g stroke=\"black\"><line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\"/><line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\"/></g>",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = MARGIN + plot_w
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * f64::from(i) / 4.0;
        let fy = y0 + (y1 - y0) * f64::from(i) / 4.0;
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{fx:.1}</text>",
            px(fx),
            HEIGHT - MARGIN + 18.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{fy:.3}</text>",
            MARGIN - 6.0,
            py(fy) + 4.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        MARGIN + plot_w / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    for (i, l) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = l
            .points
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            pts.join(" ")
        );
        for p in &pts {
            let (cx, cy) = p.split_once(',').expect("formatted pair");
            let _ = writeln!(s, "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"3\" fill=\"{color}\"/>");
        }
        let ly = MARGIN + 16.0 * i as f64;
        let lx = MARGIN + plot_w + 14.0;
        let _ = writeln!(
            s,
            "<rect x=\"{lx}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>",
            ly - 9.0
        );
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{ly:.1}\">{}</text>", lx + 14.0, escape(&l.label));
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadarSeries {
    pub label: String,
    /// One value per axis.
    pub values: Vec<f64>,
}

/// Radial axes starting at 12 o'clock; the outer ring is the largest value.
pub fn radar_chart(title: &str, axes: &[String], series: &[RadarSeries]) -> String {
    let size = 520.0;
    let mut s = header(title, size + 140.0, size);
    let (cx, cy, r) = (size / 2.0, size / 2.0 + 10.0, size / 2.0 - 70.0);
    let max = series
        .iter()
        .flat_map(|l| l.values.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::max)
        .max(1e-12);
    let n = axes.len().max(1);
    let at = |i: usize, frac: f64| {
        let a = 2.0 * PI * i as f64 / n as f64 - PI / 2.0;
        (cx + r * frac * a.cos(), cy + r * frac * a.sin())
    };
    for ring in 1..=4 {
        let frac = f64::from(ring) / 4.0;
        let pts: Vec<String> = (0..n).map(|i| at(i, frac)).map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(s, "<polygon fill=\"none\" stroke=\"#cccccc\" points=\"{}\"/>", pts.join(" "));
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"#888888\" font-size=\"10\">{:.3}</text>",
            cx + 3.0,
            cy - r * frac,
            max * frac
        );
    }
    for (i, name) in axes.iter().enumerate() {
        let (x, y) = at(i, 1.0);
        let (lx, ly) = at(i, 1.12);
        let _ = writeln!(s, "<line x1=\"{cx}\" y1=\"{cy}\" x2=\"{x:.1}\" y2=\"{y:.1}\" stroke=\"#cccccc\"/>");
        let _ = writeln!(
            s,
            "<text x=\"{lx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            ly + 4.0,
            escape(name)
        );
    }
    for (k, l) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = l
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| at(i, if v.is_finite() { v / max } else { 0.0 }))
            .map(|(x, y)| format!("{x:.1},{y:.1}"))
            .collect();
        let _ = writeln!(
            s,
            "<polygon fill=\"{color}\" fill-opacity=\"0.12\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            pts.join(" ")
        );
        let ly = 50.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>",
            size + 10.0,
            ly - 9.0
        );
        let _ = writeln!(s, "<text x=\"{}\" y=\"{ly:.1}\">{}</text>", size + 24.0, escape(&l.label));
    }
    s.push_str("</svg>\n");
    s
}
