//! Minimal standalone SVG line/marker plots.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
    /// Connect consecutive points.
    pub line: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Shown instead of axes when there is nothing to draw.
    pub empty_message: String,
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return None;
    }
    if hi - lo <= 1e-12 * hi.abs().max(1e-300) {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        Some((lo - pad, hi + pad))
    } else {
        Some((lo, hi))
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

impl Plot {
    fn ty(&self, y: f64) -> Option<f64> {
        if self.log_y {
            (y > 0.0).then(|| y.log10())
        } else {
            y.is_finite().then_some(y)
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(
            s,
            r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );

        let pts: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|se| {
                se.points
                    .iter()
                    .filter_map(|&(x, y)| Some((x, self.ty(y)?)))
            })
            .filter(|(x, _)| x.is_finite())
            .collect();
        let (Some(xr), Some(yr)) = (
            range(pts.iter().map(|p| p.0)),
            range(pts.iter().map(|p| p.1)),
        ) else {
            let msg = if self.empty_message.is_empty() {
                "no data"
            } else {
                &self.empty_message
            };
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
                WIDTH / 2.0,
                HEIGHT / 2.0,
                escape(msg)
            );
            s.push_str("</svg>\n");
            return s;
        };

        let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
        let sx = |x: f64| LEFT + (x - xr.0) / (xr.1 - xr.0) * pw;
        let sy = |y: f64| TOP + ph - (y - yr.0) / (yr.1 - yr.0) * ph;

        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = xr.0 + f * (xr.1 - xr.0);
            let yv = yr.0 + f * (yr.1 - yr.0);
            let ylab = if self.log_y {
                format!("1e{yv:.1}")
            } else {
                tick_label(yv)
            };
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
                sx(xv),
                TOP + ph + 16.0,
                tick_label(xv)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                sy(yv) + 4.0,
                escape(&ylab)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (k, se) in self.series.iter().enumerate() {
            let mapped: Vec<(f64, f64)> = se
                .points
                .iter()
                .filter_map(|&(x, y)| Some((sx(x), sy(self.ty(y)?))))
                .filter(|(x, _)| x.is_finite())
                .collect();
            if se.line && mapped.len() > 1 {
                let path: Vec<String> = mapped
                    .iter()
                    .map(|(x, y)| format!("{x:.2},{y:.2}"))
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                    se.color,
                    path.join(" ")
                );
            }
            for (x, y) in &mapped {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{}"/>"#,
                    se.color
                );
            }
            let ly = TOP + 14.0 + 18.0 * k as f64;
            let lx = WIDTH - RIGHT + 12.0;
            let _ = writeln!(
                s,
                r#"<circle cx="{lx:.1}" cy="{:.1}" r="4" fill="{}"/>"#,
                ly - 4.0,
                se.color
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{ly:.1}" font-family="sans-serif" font-size="12">{}</text>"#,
                lx + 10.0,
                escape(&se.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(points: Vec<(f64, f64)>) -> Series {
        Series {
            label: "a<b".into(),
            color: "steelblue",
            points,
            line: true,
        }
    }

    #[test]
    fn single_point_draws_one_marker() {
        let p = Plot {
            series: vec![series(vec![(1.0, 2.0)])],
            ..Default::default()
        };
        let svg = p.render();
        // one data marker plus one legend marker
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(!svg.contains("<polyline"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn empty_plot_shows_message() {
        let p = Plot {
            empty_message: "history is empty".into(),
            ..Default::default()
        };
        let svg = p.render();
        assert!(svg.contains("history is empty"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn labels_are_escaped() {
        let p = Plot {
            title: "x & y".into(),
            series: vec![series(vec![(0.0, 1.0), (1.0, 2.0)])],
            ..Default::default()
        };
        let svg = p.render();
        assert!(svg.contains("x &amp; y"));
        assert!(svg.contains("a&lt;b"));
    }

    #[test]
    fn log_axis_drops_non_positive_values() {
        let p = Plot {
            log_y: true,
            series: vec![series(vec![(0.0, 0.0), (1.0, 1e-3), (2.0, 1e-5)])],
            ..Default::default()
        };
        let svg = p.render();
        assert_eq!(svg.matches("<circle").count(), 3);
    }
}
