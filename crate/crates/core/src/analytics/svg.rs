use std::collections::BTreeMap;
use std::fmt::Write;

const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter plot of labeled 2-D points, one color per label.
pub fn scatter_svg(points: &[(String, f64, f64)], title: &str) -> String {
    let (w, h, pad) = (640.0, 480.0, 40.0);
    let bounds = |f: fn(&(String, f64, f64)) -> f64| {
        let lo = points.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() && hi > lo { (lo, hi) } else { (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0) }
    };
    let (x0, x1) = bounds(|p| p.1);
    let (y0, y1) = bounds(|p| p.2);
    let mut colors: BTreeMap<&str, &str> = BTreeMap::new();
    for (label, _, _) in points {
        let next = PALETTE[colors.len() % PALETTE.len()];
        colors.entry(label.as_str()).or_insert(next);
    }
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    for (label, x, y) in points {
        let cx = pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let cy = h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let _ = writeln!(svg, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{}" fill-opacity="0.6"/>"#, colors[label.as_str()]);
    }
    for (i, (label, color)) in colors.iter().enumerate() {
        let y = pad + 16.0 * i as f64;
        let _ = writeln!(svg, r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#, w - 150.0, y - 9.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{y}" font-size="12">{}</text>"#, w - 135.0, escape(label));
    }
    svg.push_str("</svg>\n");
    svg
}
