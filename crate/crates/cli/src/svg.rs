//! Minimal standalone SVG line plots.

use std::fmt::Write as _;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 52.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: Option<String>,
    pub points: Vec<(f64, f64)>,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Fixed axis ranges; data ranges with padding otherwise.
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Data range padded by 5% on each side; degenerate ranges are widened.
fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    if span <= 1e-12 * lo.abs().max(hi.abs()).max(1e-300) {
        let w = if lo == 0.0 { 1.0 } else { 1e-3 * lo.abs() };
        return (lo - w, hi + w);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

/// Tick positions at a 1-2-5 step inside `[lo, hi]`, with the step.
fn ticks(lo: f64, hi: f64) -> (Vec<f64>, f64) {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), step)
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    let v = if v.abs() < step * 1e-9 { 0.0 } else { v };
    if v != 0.0 && (v.abs() >= 1e6 || v.abs() < 1e-4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.decimals$}")
    }
}

/// Renders panels side by side into one SVG document.
pub fn render(panels: &[Panel], panel_w: f64, panel_h: f64) -> String {
    let width = panel_w * panels.len().max(1) as f64;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{panel_h:.0}" viewBox="0 0 {width:.0} {panel_h:.0}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut s, p, i as f64 * panel_w, panel_w, panel_h);
    }
    s.push_str("</svg>\n");
    s
}

fn render_panel(s: &mut String, p: &Panel, x0: f64, w: f64, h: f64) {
    let (px0, px1) = (x0 + MARGIN_LEFT, x0 + w - MARGIN_RIGHT);
    let (py0, py1) = (MARGIN_TOP, h - MARGIN_BOTTOM);
    let all = || p.series.iter().flat_map(|se| se.points.iter());
    let (xl, xh) = p.x_range.unwrap_or_else(|| padded_range(all().map(|q| q.0)));
    let (yl, yh) = p.y_range.unwrap_or_else(|| padded_range(all().map(|q| q.1)));
    let sx = |x: f64| px0 + (x - xl) / (xh - xl) * (px1 - px0);
    let sy = |y: f64| py1 - (y - yl) / (yh - yl) * (py1 - py0);

    writeln!(s, r#"<g class="panel">"#).unwrap();
    writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (px0 + px1) / 2.0,
        escape(&p.title)
    )
    .unwrap();
    writeln!(
        s,
        r#"<rect x="{px0:.2}" y="{py0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        px1 - px0,
        py1 - py0
    )
    .unwrap();

    let (xt, xstep) = ticks(xl, xh);
    for v in xt {
        let x = sx(v);
        writeln!(s, r#"<line x1="{x:.2}" y1="{py1:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, py1 + 5.0).unwrap();
        writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            py1 + 18.0,
            tick_label(v, xstep)
        )
        .unwrap();
    }
    let (yt, ystep) = ticks(yl, yh);
    for v in yt {
        let y = sy(v);
        writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{px0:.2}" y2="{y:.2}" stroke="black"/>"#, px0 - 5.0).unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            px0 - 8.0,
            y + 4.0,
            tick_label(v, ystep)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (px0 + px1) / 2.0,
        h - 12.0,
        escape(&p.x_label)
    )
    .unwrap();
    let ly = (py0 + py1) / 2.0;
    writeln!(
        s,
        r#"<text x="{:.2}" y="{ly:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {ly:.2})">{}</text>"#,
        x0 + 16.0,
        x0 + 16.0,
        escape(&p.y_label)
    )
    .unwrap();

    for se in &p.series {
        if se.points.is_empty() {
            continue;
        }
        let pts: Vec<String> = se
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
            se.color,
            pts.join(" ")
        )
        .unwrap();
        if se.points.len() == 1 {
            let (x, y) = se.points[0];
            writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, sx(x), sy(y), se.color).unwrap();
        }
    }

    let labelled: Vec<&Series> = p.series.iter().filter(|se| se.label.is_some()).collect();
    for (k, se) in labelled.iter().enumerate() {
        let y = py0 + 16.0 + 16.0 * k as f64;
        let x = px1 - 110.0;
        writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/>"#,
            y - 4.0,
            x + 20.0,
            y - 4.0,
            se.color
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{y:.2}">{}</text>"#,
            x + 26.0,
            escape(se.label.as_deref().unwrap_or(""))
        )
        .unwrap();
    }
    writeln!(s, "</g>").unwrap();
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_use_round_steps() {
        let (t, step) = ticks(0.0, 2.0);
        assert_eq!(step, 0.5);
        assert_eq!(t, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let (_, step) = ticks(6.905, 6.956);
        assert!((step - 0.02).abs() < 1e-15);
    }

    #[test]
    fn degenerate_range_is_widened() {
        let (lo, hi) = padded_range([7.0, 7.0].into_iter());
        assert!(lo < 7.0 && hi > 7.0);
        assert_eq!(padded_range(std::iter::empty()), (0.0, 1.0));
    }

    #[test]
    fn document_contains_series_and_legend() {
        let panel = Panel {
            title: "t".into(),
            x_label: "x & y".into(),
            y_label: "y".into(),
            series: vec![Series {
                label: Some("mu = 0".into()),
                points: vec![(0.0, 0.0), (1.0, 1.0)],
                color: PALETTE[0].into(),
            }],
            ..Panel::default()
        };
        let doc = render(&[panel.clone(), panel], 400.0, 300.0);
        assert!(doc.starts_with("<svg"));
        assert!(doc.trim_end().ends_with("</svg>"));
        assert_eq!(doc.matches("<polyline").count(), 2);
        assert!(doc.contains("mu = 0"));
        assert!(doc.contains("x &amp; y"));
    }

    #[test]
    fn single_point_gets_a_marker() {
        let panel = Panel {
            series: vec![Series {
                label: None,
                points: vec![(1.0, 2.0)],
                color: "black".into(),
            }],
            ..Panel::default()
        };
        assert!(render(&[panel], 300.0, 200.0).contains("<circle"));
    }
}
