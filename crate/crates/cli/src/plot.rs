//! Small dependency-free SVG charts. Every mark also carries its data
//! coordinates in `data-*` attributes so tests and scripts can read them back.

use std::fmt::Write as _;

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    ox: f64,
    oy: f64,
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi - lo).is_normal() {
        (lo - 0.5, hi + 0.5)
    } else {
        let m = 0.05 * (hi - lo);
        (lo - m, hi + m)
    }
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone, ox: f64, oy: f64) -> Self {
        let lim = |v: &mut dyn Iterator<Item = f64>| {
            v.filter(|x| x.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
        };
        let (x0, x1) = span_or_unit(lim(&mut xs.clone()));
        let (y0, y1) = span_or_unit(lim(&mut ys.clone()));
        Self { x0, x1, y0, y1, ox, oy }
    }

    fn px(&self, x: f64) -> f64 {
        self.ox + PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        self.oy + H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }

    fn axes(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (l, r) = (self.ox + PAD, self.ox + W - PAD);
        let (t, b) = (self.oy + PAD, self.oy + H - PAD);
        let _ = writeln!(out, r##"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#888"/>"##, r - l, b - t);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#, (l + r) / 2.0, self.oy + 24.0, esc(title));
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#, (l + r) / 2.0, b + 36.0, esc(xlabel));
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
            self.ox + 14.0, (t + b) / 2.0, self.ox + 14.0, (t + b) / 2.0, esc(ylabel)
        );
        for (v, x) in [(self.x0, l), (self.x1, r)] {
            let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#, b + 14.0, tick(v));
        }
        for (v, y) in [(self.y0, b), (self.y1, t)] {
            let _ = writeln!(out, r#"<text x="{:.2}" y="{y:.2}" text-anchor="end" font-size="10">{}</text>"#, l - 4.0, tick(v));
        }
    }
}

fn span_or_unit((lo, hi): (f64, f64)) -> (f64, f64) {
    if lo.is_finite() && hi.is_finite() {
        span(lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn tick(v: f64) -> String {
    format!("{v:.3}")
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// One labelled group of points in a scatter plot.
#[derive(Debug, Clone)]
pub struct PointSet {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Scatter plot with an optional least-squares line `y = slope * x + intercept`
/// drawn across the x range.
pub fn scatter(title: &str, xlabel: &str, ylabel: &str, sets: &[PointSet], trend: Option<(f64, f64)>) -> String {
    let all = || sets.iter().flat_map(|s| s.points.iter());
    let f = Frame::new(all().map(|p| p.0), all().map(|p| p.1), 0.0, 0.0);
    let mut out = open(W, H);
    f.axes(&mut out, title, xlabel, ylabel);
    for (k, s) in sets.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        let _ = writeln!(out, r#"<g class="points" data-label="{}">"#, esc(&s.label));
        for &(x, y) in &s.points {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}" data-x="{x}" data-y="{y}"/>"#, f.px(x), f.py(y));
        }
        out.push_str("</g>\n");
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="10" fill="{c}">{}</text>"#, W - PAD - 80.0, PAD + 12.0 * (k as f64 + 1.0), esc(&s.label));
    }
    if let Some((slope, intercept)) = trend {
        let xs: Vec<f64> = all().map(|p| p.0).collect();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() {
            let (ya, yb) = (slope * lo + intercept, slope * hi + intercept);
            let _ = writeln!(
                out,
                r##"<line class="trend" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333" stroke-dasharray="4 2" data-x1="{lo}" data-y1="{ya}" data-x2="{hi}" data-y2="{yb}"/>"##,
                f.px(lo), f.py(ya), f.px(hi), f.py(yb)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Equal-width histogram over the finite values; returns the SVG and bin counts.
pub fn histogram(title: &str, xlabel: &str, values: &[f64], bins: usize, marker: Option<f64>) -> (String, Vec<usize>) {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    let bins = bins.max(1);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if v.is_empty() { (0.0, 1.0) } else if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in &v {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let f = Frame { x0: lo, x1: hi, y0: 0.0, y1: top, ox: 0.0, oy: 0.0 };
    let mut out = open(W, H);
    f.axes(&mut out, title, xlabel, "count");
    for (b, &c) in counts.iter().enumerate() {
        let (a, z) = (lo + b as f64 * width, lo + (b + 1) as f64 * width);
        let _ = writeln!(
            out,
            r##"<rect class="bin" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4" stroke="white" data-lo="{a}" data-hi="{z}" data-count="{c}"/>"##,
            f.px(a), f.py(c as f64), f.px(z) - f.px(a), f.py(0.0) - f.py(c as f64)
        );
    }
    if let Some(m) = marker.filter(|m| (lo..=hi).contains(m)) {
        let _ = writeln!(
            out,
            r##"<line class="marker" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#d62728" data-x="{m}"/>"##,
            f.px(m), f.py(0.0), f.px(m), f.py(top)
        );
    }
    out.push_str("</svg>\n");
    (out, counts)
}

/// A named polyline; `None` values break the line.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, Option<f64>)>,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub series: Vec<Series>,
}

/// Grid of line charts sharing an x label, two panels per row.
pub fn line_panels(title: &str, xlabel: &str, panels: &[Panel]) -> String {
    let cols = 2usize;
    let rows = panels.len().div_ceil(cols).max(1);
    let mut out = open(W * cols as f64, H * rows as f64 + 30.0);
    let _ = writeln!(out, r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="16">{}</text>"#, W, esc(title));
    for (i, p) in panels.iter().enumerate() {
        let pts = || p.series.iter().flat_map(|s| s.points.iter());
        let f = Frame::new(
            pts().map(|q| q.0),
            pts().filter_map(|q| q.1),
            W * (i % cols) as f64,
            30.0 + H * (i / cols) as f64,
        );
        f.axes(&mut out, &p.title, xlabel, "");
        for (k, s) in p.series.iter().enumerate() {
            let c = COLORS[k % COLORS.len()];
            let _ = writeln!(out, r#"<g class="series" data-panel="{}" data-label="{}">"#, esc(&p.title), esc(&s.label));
            for seg in s.points.split(|q| q.1.is_none()).filter(|seg| !seg.is_empty()) {
                let path: Vec<String> = seg.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y.unwrap_or_default()))).collect();
                let _ = writeln!(out, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
            }
            for &(x, y) in &s.points {
                if let Some(y) = y {
                    let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{c}" data-x="{x}" data-y="{y}"/>"#, f.px(x), f.py(y));
                }
            }
            out.push_str("</g>\n");
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="10" fill="{c}">{}</text>"#,
                f.ox + W - PAD - 70.0,
                f.oy + PAD + 12.0 * (k as f64 + 1.0),
                esc(&s.label)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Reads `data-*` attributes of the first element with the given class.
pub fn data_attrs(svg: &str, class: &str) -> Vec<(String, f64)> {
    let key = format!("class=\"{class}\"");
    let Some(start) = svg.find(&key) else { return Vec::new() };
    let end = svg[start..].find('>').map_or(svg.len(), |e| start + e);
    let mut out = Vec::new();
    let mut rest = &svg[start..end];
    while let Some(i) = rest.find(" data-") {
        rest = &rest[i + 6..];
        let Some(eq) = rest.find("=\"") else { break };
        let name = rest[..eq].to_string();
        let val_end = rest[eq + 2..].find('"').map_or(rest.len(), |e| eq + 2 + e);
        if let Ok(v) = rest[eq + 2..val_end].parse() {
            out.push((name, v));
        }
        rest = &rest[val_end..];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_sum_to_finite_rows() {
        let v = [1.0, 1.1, 1.15, 1.3, 2.0, f64::NAN, 1.19];
        let (svg, counts) = histogram("DIR", "DIR", &v, 5, Some(1.2));
        assert_eq!(counts.iter().sum::<usize>(), 6);
        assert_eq!(svg.matches("class=\"bin\"").count(), 5);
        assert!(svg.contains("class=\"marker\""));
    }

    #[test]
    fn constant_values_still_plot() {
        let (_, counts) = histogram("c", "x", &[2.0; 4], 3, None);
        assert_eq!(counts.iter().sum::<usize>(), 4);
        let s = scatter("s", "x", "y", &[PointSet { label: "a".into(), points: vec![(1.0, 1.0)] }], Some((0.0, 1.0)));
        assert!(!s.contains("NaN"));
    }

    #[test]
    fn trend_attributes_round_trip() {
        let pts = vec![(0.0, 1.0), (2.0, 5.0)];
        let svg = scatter("t", "x", "y", &[PointSet { label: "a".into(), points: pts }], Some((2.0, 1.0)));
        let a: std::collections::HashMap<_, _> = data_attrs(&svg, "trend").into_iter().collect();
        assert_eq!((a["x1"], a["y1"], a["x2"], a["y2"]), (0.0, 1.0, 2.0, 5.0));
    }

    #[test]
    fn panels_break_on_missing_values() {
        let p = Panel {
            title: "flag_rate".into(),
            series: vec![Series { label: "a".into(), points: vec![(0.0, Some(0.1)), (0.5, None), (0.8, Some(0.2))] }],
        };
        let svg = line_panels("grid", "beta", &[p]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
