//! Static SVG of `λ₁/B` against `B` with prediction overlays, and the matching
//! gnuplot data file.

use std::fmt::Write;

use magneto_spectra::sweep_fit::SweepTable;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: [f64; 4] = [70.0, 30.0, 40.0, 60.0]; // left, right, top, bottom

struct Series<'a> {
    label: &'a str,
    color: &'a str,
    points: Vec<(f64, f64)>,
    markers: bool,
}

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let raw = (hi - lo) / count as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-12 * step {
        out.push(t);
        t += step;
    }
    out
}

/// SVG with a logarithmic `B` axis.
pub fn render_svg(table: &SweepTable, title: &str) -> String {
    let per_b = |v: &[Option<f64>]| -> Vec<(f64, f64)> {
        table.b.iter().zip(v).filter_map(|(b, p)| p.map(|p| (*b, p / b))).collect()
    };
    let series = [
        Series {
            label: "λ₁/B",
            color: "#1f4e9c",
            points: table.b.iter().zip(&table.lambda1).map(|(b, l)| (*b, l / b)).collect(),
            markers: true,
        },
        Series { label: "leading term", color: "#999999", points: per_b(&table.pred_rough), markers: false },
        Series { label: "two-term prediction", color: "#c0392b", points: per_b(&table.pred_two_term), markers: false },
    ];
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (xmin, xmax) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (mut ymin, mut ymax) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let pad = 0.08 * (ymax - ymin).max(1e-6);
    ymin -= pad;
    ymax += pad;
    let (lx0, lx1) = (xmin.ln() - 0.05, xmax.ln() + 0.05);
    let [ml, mr, mt, mb] = MARGIN;
    let px = |x: f64| ml + (x.ln() - lx0) / (lx1 - lx0) * (WIDTH - ml - mr);
    let py = |y: f64| HEIGHT - mb - (y - ymin) / (ymax - ymin) * (HEIGHT - mt - mb);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, x1, y0, y1) = (ml, WIDTH - mr, mt, HEIGHT - mb);
    let _ = writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
    for b in &table.b {
        let x = px(*b);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y1 + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{b}</text>"#, y1 + 19.0);
    }
    for t in nice_ticks(ymin, ymax, 6) {
        let y = py(t);
        let _ = writeln!(s, r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#e5e5e5"/>"##);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{t:.4}</text>"#, x0 - 6.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">B</text>"#, (x0 + x1) / 2.0, HEIGHT - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">λ₁ / B</text>"#,
        (y0 + y1) / 2.0
    );
    for (k, ser) in series.iter().enumerate().filter(|(_, s)| !s.points.is_empty()) {
        let path: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let dash = if ser.markers { "" } else { r#" stroke-dasharray="6 4""# };
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#, path.join(" "), ser.color);
        if ser.markers {
            for &(x, y) in &ser.points {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{}"/>"#, px(x), py(y), ser.color);
            }
        }
        let ly = y0 + 18.0 + 16.0 * k as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="1.5"{dash}/>"#, x1 - 170.0, x1 - 145.0, ser.color);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x1 - 140.0, ly + 4.0, ser.label);
    }
    s.push_str("</svg>\n");
    s
}

/// Whitespace-separated columns `B λ₁/B rough/B two_term/B`, `NaN` when absent.
pub fn gnuplot_data(table: &SweepTable) -> String {
    let mut s = String::from("# B lambda1/B pred_rough/B pred_two_term/B\n");
    let f = |v: Option<f64>, b: f64| v.map_or("NaN".to_string(), |x| format!("{:.12e}", x / b));
    for i in 0..table.b.len() {
        let b = table.b[i];
        let _ = writeln!(s, "{b} {:.12e} {} {}", table.lambda1[i] / b, f(table.pred_rough[i], b), f(table.pred_two_term[i], b));
    }
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> SweepTable {
        SweepTable {
            b: vec![50.0, 100.0, 200.0],
            lambda1: vec![27.5, 56.4, 114.3],
            pred_rough: vec![Some(29.5), Some(59.0), Some(118.0)],
            pred_two_term: vec![None, None, None],
        }
    }

    #[test]
    fn svg_has_points_and_overlay() {
        let svg = render_svg(&table(), "disk <β = 1>");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("&lt;β = 1&gt;"));
    }

    #[test]
    fn data_file_columns() {
        let d = gnuplot_data(&table());
        let rows: Vec<&str> = d.lines().skip(1).collect();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].split_whitespace().count(), 4);
        assert!(rows[0].ends_with("NaN"));
    }

    #[test]
    fn ticks_cover_range() {
        let t = nice_ticks(0.51, 0.59, 6);
        assert!(t.len() >= 3 && t[0] >= 0.51 && *t.last().unwrap() <= 0.59);
    }
}
