//! Minimal SVG line charts: axes, ticks, polylines and dashed outlines.

use std::fmt::Write;

use linbarrier::polytope::{IndexSet, SafetySpec};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 32.0;
const MARGIN_B: f64 = 48.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
        }
    }
}

#[derive(Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Closed outlines drawn dotted under the series.
    pub outlines: Vec<Vec<(f64, f64)>>,
    pub equal_aspect: bool,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl Chart {
    fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        let pts = self
            .series
            .iter()
            .flat_map(|s| s.points.iter())
            .chain(self.outlines.iter().flatten())
            .filter(|(x, y)| x.is_finite() && y.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return ((0.0, 1.0), (0.0, 1.0));
        }
        let widen = |lo: f64, hi: f64| {
            if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let (mut xr, mut yr) = (widen(x0, x1), widen(y0, y1));
        if self.equal_aspect {
            let pw = WIDTH - MARGIN_L - MARGIN_R;
            let ph = HEIGHT - MARGIN_T - MARGIN_B;
            let scale = ((xr.1 - xr.0) / pw).max((yr.1 - yr.0) / ph);
            let (cx, cy) = (0.5 * (xr.0 + xr.1), 0.5 * (yr.0 + yr.1));
            xr = (cx - 0.5 * scale * pw, cx + 0.5 * scale * pw);
            yr = (cy - 0.5 * scale * ph, cy + 0.5 * scale * ph);
        }
        (xr, yr)
    }

    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.bounds();
        let pw = WIDTH - MARGIN_L - MARGIN_R;
        let ph = HEIGHT - MARGIN_T - MARGIN_B;
        let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| MARGIN_T + (y1 - y) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        for t in ticks(x0, x1) {
            let _ = writeln!(
                s,
                r##"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="#e0e0e0"/><text x="{0:.2}" y="{3}" text-anchor="middle">{4}</text>"##,
                sx(t),
                MARGIN_T,
                MARGIN_T + ph,
                MARGIN_T + ph + 14.0,
                t
            );
        }
        for t in ticks(y0, y1) {
            let _ = writeln!(
                s,
                r##"<line x1="{1}" y1="{0:.2}" x2="{2}" y2="{0:.2}" stroke="#e0e0e0"/><text x="{3}" y="{0:.2}" text-anchor="end" dominant-baseline="middle">{4}</text>"##,
                sy(t),
                MARGIN_L,
                MARGIN_L + pw,
                MARGIN_L - 4.0,
                t
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            MARGIN_L + pw / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{0}" text-anchor="middle" transform="rotate(-90 14 {0})">{1}</text>"#,
            MARGIN_T + ph / 2.0,
            escape(&self.y_label)
        );
        for o in &self.outlines {
            let pts: Vec<String> = o
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="none" stroke="black" stroke-dasharray="3 3"/>"#,
                pts.join(" ")
            );
        }
        for (k, series) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let pts: Vec<String> = series
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                pts.join(" ")
            );
            let ly = MARGIN_T + 14.0 + 14.0 * k as f64;
            let lx = MARGIN_L + pw - 120.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{ly}" dominant-baseline="middle">{}</text>"#,
                lx + 18.0,
                lx + 22.0,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Vertices of one term's polygon in counter-clockwise order. Empty unless
/// the spec is planar and the term is a bounded polygon.
pub fn term_polygon(spec: &SafetySpec, term: &IndexSet) -> Vec<(f64, f64)> {
    if spec.n() != 2 {
        return Vec::new();
    }
    let rows = spec.rows(term);
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (a, b) = (rows[i].a(), rows[j].a());
            let det = a[0] * b[1] - a[1] * b[0];
            if det.abs() < 1e-12 {
                continue;
            }
            // a . x = -b_i, b . x = -b_j
            let (ri, rj) = (-rows[i].b(), -rows[j].b());
            let p = ((ri * b[1] - a[1] * rj) / det, (a[0] * rj - ri * b[0]) / det);
            let inside = rows.iter().all(|h| h.eval(&[p.0, p.1]) >= -1e-9);
            let fresh = pts
                .iter()
                .all(|q| (q.0 - p.0).abs() + (q.1 - p.1).abs() > 1e-9);
            if inside && fresh {
                pts.push(p);
            }
        }
    }
    if pts.len() < 3 {
        return Vec::new();
    }
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    pts.sort_by(|p, q| {
        (p.1 - cy)
            .atan2(p.0 - cx)
            .total_cmp(&(q.1 - cy).atan2(q.0 - cx))
    });
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use linbarrier::polytope::presets::hexagon;

    #[test]
    fn hexagon_has_six_vertices() {
        let spec = hexagon();
        let v = term_polygon(&spec, &spec.terms()[0]);
        assert_eq!(v.len(), 6);
        for p in v {
            assert!(linbarrier::polytope::eval_h(&spec, &[p.0, p.1]).abs() < 1e-12);
        }
    }

    #[test]
    fn ticks_cover_range() {
        let t = ticks(-1.3, 2.7);
        assert_eq!(t.first(), Some(&-1.0));
        assert!(t.last().unwrap() <= &2.7);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn render_is_well_formed() {
        let c = Chart {
            title: "a < b".into(),
            series: vec![Series::new("s", vec![(0.0, 0.0), (1.0, 2.0)])],
            ..Chart::default()
        };
        let svg = c.render();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b") && svg.contains("<polyline"));
    }
}
