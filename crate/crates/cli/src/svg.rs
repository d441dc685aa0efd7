//! Bare-bones SVG line plots with a log-scale y axis.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 2000;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];

pub struct Series {
    pub label: String,
    /// `(iteration, value)`; non-positive values are dropped on the log axis.
    pub points: Vec<(f64, f64)>,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Vertical markers `(x, label)`.
    pub markers: Vec<(f64, String)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn thin(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let kept: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1 > 0.0 && p.1.is_finite()).collect();
    if kept.len() <= MAX_POINTS {
        return kept;
    }
    let stride = kept.len().div_ceil(MAX_POINTS);
    let mut out: Vec<(f64, f64)> = kept.iter().copied().step_by(stride).collect();
    if out.last() != kept.last() {
        out.push(*kept.last().unwrap());
    }
    out
}

impl Plot {
    /// Renders the plot. `timestamp` adds a generation comment and is the
    /// only non-deterministic part of the output.
    pub fn render(&self, timestamp: Option<u64>) -> String {
        let data: Vec<Vec<(f64, f64)>> = self.series.iter().map(|s| thin(&s.points)).collect();
        let all = data.iter().flatten();
        let x_max = all.clone().map(|p| p.0).chain(self.markers.iter().map(|m| m.0)).fold(1.0, f64::max);
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
        let (d_lo, d_hi) = if lo.is_finite() {
            let a = lo.log10().floor();
            let b = hi.log10().ceil();
            (a, if b > a { b } else { a + 1.0 })
        } else {
            (-1.0, 0.0)
        };
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + pw * x / x_max;
        let sy = |v: f64| TOP + ph * (d_hi - v.log10()) / (d_hi - d_lo);

        let mut out = String::new();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        if let Some(t) = timestamp {
            writeln!(out, "<!-- generated at unix time {t} -->").unwrap();
        }
        writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
        writeln!(out, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(&self.title)).unwrap();
        writeln!(
            out,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        )
        .unwrap();

        // decade ticks
        let mut d = d_lo;
        while d <= d_hi + 0.5 {
            let y = sy(10f64.powf(d));
            writeln!(out, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, LEFT + pw).unwrap();
            writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{}</text>"#, LEFT - 6.0, y + 4.0, d as i64).unwrap();
            d += 1.0;
        }
        for i in 0..=5 {
            let xv = x_max * i as f64 / 5.0;
            let x = sx(xv);
            writeln!(out, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0).unwrap();
            writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, xv.round()).unwrap();
        }
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0, escape(&self.x_label)).unwrap();
        writeln!(
            out,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        )
        .unwrap();

        for (i, (s, pts)) in self.series.iter().zip(&data).enumerate() {
            let color = COLORS[i % COLORS.len()];
            if !pts.is_empty() {
                let coords: Vec<String> = pts.iter().map(|&(x, v)| format!("{:.2},{:.2}", sx(x), sy(v))).collect();
                writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" ")).unwrap();
            }
            let ly = TOP + 10.0 + 18.0 * i as f64;
            let lx = LEFT + pw + 10.0;
            writeln!(out, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0).unwrap();
            writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 25.0, ly + 4.0, escape(&s.label)).unwrap();
        }
        for (x, label) in &self.markers {
            let px = sx(*x);
            writeln!(
                out,
                r#"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="orange" stroke-width="2" stroke-dasharray="6 3"/>"#,
                TOP + ph
            )
            .unwrap();
            writeln!(out, r#"<text x="{:.2}" y="{:.2}" fill="orange">{}</text>"#, px + 4.0, TOP + 14.0, escape(label)).unwrap();
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plot() -> Plot {
        Plot {
            title: "t".into(),
            x_label: "iteration".into(),
            y_label: "KKT".into(),
            series: vec![Series {
                label: "a<b".into(),
                points: (0..5000).map(|k| (k as f64, 10f64.powf(-(k as f64) / 1000.0))).collect(),
            }],
            markers: vec![(2500.0, "identified".into())],
        }
    }

    #[test]
    fn deterministic_without_timestamp() {
        assert_eq!(plot().render(None), plot().render(None));
        assert!(!plot().render(None).contains("unix time"));
        assert!(plot().render(Some(7)).contains("unix time 7"));
    }

    #[test]
    fn thins_and_escapes() {
        let svg = plot().render(None);
        let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert!(poly.matches(',').count() <= MAX_POINTS + 1);
        assert!(svg.contains("a&lt;b"));
        assert!(svg.contains("stroke=\"orange\""));
    }

    #[test]
    fn drops_nonpositive_values() {
        let pts = thin(&[(0.0, 1.0), (1.0, 0.0), (2.0, -1.0), (3.0, f64::NAN)]);
        assert_eq!(pts, vec![(0.0, 1.0)]);
    }
}
