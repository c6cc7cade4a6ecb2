//! Static SVG: line plots of curves and the change region as shaded
//! rectangles in the `(x, c)` plane.

use std::fmt::Write;

use ratchet_core::FiniteStrategy;

const W: f64 = 720.0;
const H: f64 = 440.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }

    fn axes(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
        let _ =
            writeln!(out, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, r - l, b - t);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            t - 18.0,
            escape(title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
            W / 2.0,
            H - 12.0,
            escape(xlabel)
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(ylabel)
        );
        for (v, x, anchor) in [(self.x0, l, "start"), (self.x1, r, "end")] {
            let _ = writeln!(
                out,
                r#"<text x="{x}" y="{}" text-anchor="{anchor}" font-size="10">{}</text>"#,
                b + 14.0,
                short(v)
            );
        }
        for (v, y) in [(self.y0, b), (self.y1, t + 10.0)] {
            let _ =
                writeln!(out, r#"<text x="{}" y="{y}" text-anchor="end" font-size="10">{}</text>"#, l - 4.0, short(v));
        }
    }
}

fn short(v: f64) -> String {
    format!("{v:.4}").trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open() -> String {
    format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#) + "\n"
}

/// One polyline per named series.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let pts = series.iter().flat_map(|(_, s)| s.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let frame = Frame { x0, x1, y0, y1 };
    let mut out = open();
    frame.axes(&mut out, title, xlabel, ylabel);
    for (k, (name, s)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let points: Vec<String> = s
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = MARGIN + 16.0 + 16.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{ly}" font-size="11" fill="{color}">{}</text>"#,
            W - MARGIN - 150.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Rate `c_k` owns the band `[c_k, c_{k+1})`; every component of its change
/// set is shaded in that band, truncated at `x_limit`.
pub fn region_plot(title: &str, strategy: &FiniteStrategy, x_limit: f64) -> String {
    let rates = strategy.rates.rates();
    let frame = Frame { x0: 0.0, x1: x_limit, y0: 0.0, y1: strategy.rates.ceiling() };
    let mut out = open();
    for (k, set) in strategy.change_sets.iter().enumerate() {
        let (lo, hi) = (rates[k], rates[k + 1]);
        for (a, b) in set.bounds() {
            if a > x_limit {
                continue;
            }
            let b = b.unwrap_or(x_limit).min(x_limit);
            let (px0, px1) = (frame.px(a), frame.px(b).max(frame.px(a) + 0.5));
            let (py0, py1) = (frame.py(hi), frame.py(lo));
            let _ = writeln!(
                out,
                r##"<rect x="{px0:.2}" y="{py0:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="none"/>"##,
                px1 - px0,
                (py1 - py0).max(0.5)
            );
        }
    }
    frame.axes(&mut out, title, "surplus x", "rate c");
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_is_well_formed() {
        let s = line_plot("t", "x", "y", &[("a<b", vec![(0.0, 0.0), (1.0, 2.0)])]);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a&lt;b"));
        assert_eq!(s.matches("<polyline").count(), 1);
    }

    #[test]
    fn flat_series_do_not_divide_by_zero() {
        let s = line_plot("t", "x", "y", &[("c", vec![(0.0, 1.0), (1.0, 1.0)])]);
        assert!(!s.contains("NaN"));
    }
}
