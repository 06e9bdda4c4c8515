//! Minimal SVG plot writer for experiment artifacts.
//!
//! Two outputs: line plots of scalar time series and flat-shaded
//! triangle-mesh field plots. The writer is deliberately small — fixed
//! canvas, automatic axis ranges, no text shaping beyond `<text>`
//! elements — and fully deterministic, so plots regenerate
//! byte-identically from the same data.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// One named series of (t, value) samples.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        // degenerate range: pad symmetrically
        let pad = if hi.abs() > 0.0 { hi.abs() * 0.5 } else { 0.5 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

/// Line plot of one or more series on a shared time axis.
pub fn line_plot(title: &str, series: &[Series<'_>]) -> String {
    let (x_lo, x_hi) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y_lo, y_hi) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    // axes
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M {x0} {y1} L {x0} {y0} L {x1} {y0}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    // tick labels at the axis extremes
    let _ = writeln!(
        out,
        r#"<text x="{x0}" y="{ty}" font-size="12" text-anchor="middle">{v:.3}</text>"#,
        ty = y0 + 18.0,
        v = x_lo
    );
    let _ = writeln!(
        out,
        r#"<text x="{x1}" y="{ty}" font-size="12" text-anchor="middle">{v:.3}</text>"#,
        ty = y0 + 18.0,
        v = x_hi
    );
    let _ = writeln!(
        out,
        r#"<text x="{tx}" y="{y0}" font-size="12" text-anchor="end">{v:.3}</text>"#,
        tx = x0 - 6.0,
        v = y_lo
    );
    let _ = writeln!(
        out,
        r#"<text x="{tx}" y="{y1}" font-size="12" text-anchor="end">{v:.3}</text>"#,
        tx = x0 - 6.0,
        v = y_hi
    );
    let _ = writeln!(
        out,
        r#"<text x="{cx}" y="24" font-size="15" text-anchor="middle">{title}</text>"#,
        cx = WIDTH / 2.0
    );
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut d = String::new();
        for (i, (x, y)) in s.points.iter().enumerate() {
            let _ = write!(d, "{}{:.3} {:.3} ", if i == 0 { "M " } else { "L " }, sx(*x), sy(*y));
        }
        let _ = writeln!(
            out,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
        );
        let ly = 40.0 + 16.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{ly}" x2="{x2}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            x = WIDTH - MARGIN - 120.0,
            x2 = WIDTH - MARGIN - 96.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{ty}" font-size="12">{label}</text>"#,
            x = WIDTH - MARGIN - 90.0,
            ty = ly + 4.0,
            label = s.label
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Flat-shaded scalar field on a triangle mesh: each triangle is filled
/// with the color of its vertex-average value on a blue-white-red map.
pub fn field_plot(
    title: &str,
    vertices: &[[f64; 2]],
    triangles: &[[usize; 3]],
    values: &[f64],
) -> String {
    let (x_lo, x_hi) = range(vertices.iter().map(|v| v[0]));
    let (y_lo, y_hi) = range(vertices.iter().map(|v| v[1]));
    let (v_lo, v_hi) = range(values.iter().copied());
    let span = (WIDTH - 2.0 * MARGIN).min(HEIGHT - 2.0 * MARGIN);
    let scale = span / (x_hi - x_lo).max(y_hi - y_lo);
    let sx = |x: f64| MARGIN + (x - x_lo) * scale;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_lo) * scale;
    let color = |v: f64| {
        let t = ((v - v_lo) / (v_hi - v_lo)).clamp(0.0, 1.0);
        // blue (0) → white (0.5) → red (1)
        let (r, g, b) = if t < 0.5 {
            let s = t * 2.0;
            (s, s, 1.0)
        } else {
            let s = (1.0 - t) * 2.0;
            (1.0, s, s)
        };
        format!(
            "#{:02x}{:02x}{:02x}",
            (r * 255.0) as u8,
            (g * 255.0) as u8,
            (b * 255.0) as u8
        )
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{cx}" y="24" font-size="15" text-anchor="middle">{title} (range {v_lo:.3e} … {v_hi:.3e})</text>"#,
        cx = WIDTH / 2.0
    );
    for tri in triangles {
        let avg = (values[tri[0]] + values[tri[1]] + values[tri[2]]) / 3.0;
        let pts: Vec<String> = tri
            .iter()
            .map(|&v| format!("{:.3},{:.3}", sx(vertices[v][0]), sy(vertices[v][1])))
            .collect();
        let _ = writeln!(
            out,
            "<polygon points=\"{}\" fill=\"{}\" stroke=\"#888\" stroke-width=\"0.3\"/>",
            pts.join(" "),
            color(avg)
        );
    }
    out.push_str("</svg>\n");
    out
}
