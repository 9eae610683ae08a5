//! CSV tables and single-series SVG line charts.

use std::fmt::Write;

use crate::scenarios::SweepRow;

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("k,vertices,edges,modulus,lower_bound,seconds\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{:.3}",
            r.k, r.vertices, r.edges, r.modulus, r.lower_bound, r.seconds
        )
        .expect("writing to a string");
    }
    out
}

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 48.0;

/// Polyline chart of `points` with markers, axis labels and tick values.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let (x0, x1) = bounds(points.iter().map(|p| p.0));
    // The y range always includes zero so that a floor is visible.
    let (y0, y1) = bounds(points.iter().map(|p| p.1).chain([0.0]));
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        w,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" fill="none" stroke="black"/>"#
    );
    for &(x, _) in points {
        let _ = writeln!(
            w,
            r#"<text x="{:.1}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
            sx(x),
            bottom + 16.0,
            trim(x)
        );
    }
    for y in [y0, 0.5 * (y0 + y1), y1] {
        let _ = writeln!(
            w,
            r#"<text x="{}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{:.3}</text>"#,
            left - 6.0,
            sy(y) + 4.0,
            y
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        w,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    let coords: Vec<String> = points.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
    let _ = writeln!(
        w,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
        coords.join(" ")
    );
    for &(x, y) in points {
        let _ = writeln!(
            w,
            r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="steelblue"/>"#,
            sx(x),
            sy(y)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn trim(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_one_row_per_level() {
        let rows = vec![SweepRow {
            k: 1,
            vertices: 10,
            edges: 20,
            modulus: 0.5,
            lower_bound: 0.49,
            seconds: 0.01,
        }];
        let csv = sweep_csv(&rows);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("1,10,20,0.5,0.49,"));
    }

    #[test]
    fn chart_is_well_formed() {
        let svg = line_chart("a < b", "k", "Mod", &[(1.0, 0.5), (2.0, 0.5), (3.0, 0.52)]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<circle").count(), 3);
        let flat = line_chart("", "", "", &[]);
        assert!(flat.contains("<polyline"));
    }
}
