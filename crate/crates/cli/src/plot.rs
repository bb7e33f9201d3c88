//! Minimal static SVG: line/point charts and heatmaps.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

impl Scale {
    fn map(self, v: f64) -> f64 {
        match self {
            Scale::Linear => v,
            Scale::Log => v.log10(),
        }
    }

    fn usable(self, v: f64) -> bool {
        v.is_finite() && (self == Scale::Linear || v > 0.0)
    }
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub markers: bool,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub series: Vec<Series>,
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>
"#,
        LEFT + (W - LEFT - RIGHT) / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick(v: f64, scale: Scale) -> String {
    match scale {
        Scale::Log => format!("1e{}", v.round() as i64),
        Scale::Linear => format!("{:.3}", v),
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return None;
    }
    Some(if hi - lo < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo, hi) })
}

fn axes(out: &mut String, x: (f64, f64), y: (f64, f64), xs: Scale, ys: Scale, xl: &str, yl: &str) {
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (px, py) = (LEFT + f * pw, TOP + ph - f * ph);
        let _ = writeln!(
            out,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            TOP + ph + 16.0,
            tick(x.0 + f * (x.1 - x.0), xs)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            py + 4.0,
            tick(y.0 + f * (y.1 - y.0), ys)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 18.0,
        escape(xl)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(18,{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        escape(yl)
    );
}

pub fn chart(c: &Chart) -> String {
    let mut out = String::new();
    header(&mut out, &c.title);
    let usable = |&(x, y): &(f64, f64)| c.x_scale.usable(x) && c.y_scale.usable(y);
    let all = || c.series.iter().flat_map(|s| s.points.iter().filter(|p| usable(p)));
    let (Some(xb), Some(yb)) = (
        bounds(all().map(|p| c.x_scale.map(p.0))),
        bounds(all().map(|p| c.y_scale.map(p.1))),
    ) else {
        out.push_str("</svg>\n");
        return out;
    };
    axes(&mut out, xb, yb, c.x_scale, c.y_scale, &c.x_label, &c.y_label);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let px = |x: f64| LEFT + (c.x_scale.map(x) - xb.0) / (xb.1 - xb.0) * pw;
    let py = |y: f64| TOP + ph - (c.y_scale.map(y) - yb.0) / (yb.1 - yb.0) * ph;
    for (k, s) in c.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s.points.iter().filter(|p| usable(p)).map(|&(x, y)| (px(x), py(y))).collect();
        if s.markers {
            for (x, y) in &pts {
                let _ = writeln!(out, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{color}"/>"#);
            }
        } else if !pts.is_empty() {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="12" height="12" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            W - RIGHT + 10.0,
            ly - 10.0,
            W - RIGHT + 28.0,
            ly,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Row-major `values[i * xs.len() + j]` over `ys[i]` and `xs[j]`; both axes logarithmic.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64], values: &[Option<f64>]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let x_log: Vec<f64> = xs.iter().map(|v| v.max(f64::MIN_POSITIVE).log10()).collect();
    let y_log: Vec<f64> = ys.iter().map(|v| v.max(f64::MIN_POSITIVE).log10()).collect();
    let xb = bounds(x_log.iter().copied()).unwrap_or((0.0, 1.0));
    let yb = bounds(y_log.iter().copied()).unwrap_or((0.0, 1.0));
    axes(&mut out, xb, yb, Scale::Log, Scale::Log, x_label, y_label);
    let vb = bounds(values.iter().flatten().copied().filter(|v| v.is_finite())).unwrap_or((0.0, 1.0));
    let (cw, ch) = (pw / xs.len().max(1) as f64, ph / ys.len().max(1) as f64);
    for (i, _) in ys.iter().enumerate() {
        for (j, _) in xs.iter().enumerate() {
            let fill = match values.get(i * xs.len() + j).copied().flatten() {
                Some(v) if v.is_finite() => color_ramp((v - vb.0) / (vb.1 - vb.0)),
                _ => "#cccccc".to_string(),
            };
            let _ = writeln!(
                out,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                LEFT + j as f64 * cw,
                TOP + ph - (i + 1) as f64 * ch,
                cw + 0.3,
                ch + 0.3
            );
        }
    }
    for k in 0..=4 {
        let f = 1.0 - k as f64 / 4.0;
        let y = TOP + 22.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{y:.1}" width="14" height="14" fill="{}"/><text x="{:.1}" y="{:.1}">{:.3e}</text>"#,
            W - RIGHT + 12.0,
            color_ramp(f),
            W - RIGHT + 32.0,
            y + 11.0,
            vb.0 + f * (vb.1 - vb.0)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn color_ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(68.0, 253.0), lerp(1.0, 231.0), lerp(84.0, 37.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_drops_unplottable_points() {
        let svg = chart(&Chart {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            x_scale: Scale::Log,
            y_scale: Scale::Linear,
            series: vec![Series {
                label: "a".into(),
                points: vec![(0.0, 1.0), (1.0, 2.0), (10.0, f64::NAN), (100.0, 3.0)],
                markers: false,
            }],
        });
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(line.matches(',').count(), 2);
    }

    #[test]
    fn heatmap_has_one_rect_per_cell() {
        let svg = heatmap("t", "x", "y", &[1.0, 10.0, 100.0], &[1.0, 2.0], &[Some(1.0), None, Some(3.0), Some(0.0), Some(2.0), Some(5.0)]);
        let cells = svg.lines().filter(|l| l.starts_with("<rect x") && !l.contains("<text")).count();
        assert_eq!(cells, 6 + 1);
        assert!(svg.contains("#cccccc"));
    }
}
