use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::trace::{seed_summary, CurvePoint, FlowTrace, Quantity};
use crate::error::Result;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// One curve: seed mean per epoch with a min/max band.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartSeries {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

/// A standalone SVG document. `cap` draws a dashed horizontal reference line
/// and forces the y range to include `[0, cap]`.
pub fn render_line_chart(title: &str, y_label: &str, series: &[ChartSeries], cap: Option<f64>) -> String {
    let all = series.iter().flat_map(|s| &s.points);
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p.epoch as f64);
        x1 = x1.max(p.epoch as f64);
        for v in [p.min, p.max, p.mean].into_iter().filter(|v| v.is_finite()) {
            y0 = y0.min(v);
            y1 = y1.max(v);
        }
    }
    if let Some(c) = cap {
        y0 = y0.min(0.0);
        y1 = y1.max(c);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = (y1 - y0) * 0.05;
    y0 -= pad;
    y1 += pad;

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );

    for t in ticks(x0, x1, 6) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#444"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 19.0,
            fmt_tick(t)
        );
    }
    for t in ticks(y0, y1, 6) {
        let y = sy(t);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">epoch</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(y_label)
    );

    if let Some(c) = cap {
        let y = sy(c);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#000" stroke-dasharray="6 4"/><text x="{}" y="{:.2}">H(X) = {c}</text>"##,
            LEFT + pw,
            LEFT + pw + 6.0,
            y + 4.0
        );
    }

    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<&CurvePoint> = ser.points.iter().filter(|p| p.mean.is_finite()).collect();
        if pts.len() > 1 {
            let upper = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.epoch as f64), sy(p.max)));
            let lower = pts.iter().rev().map(|p| format!("{:.2},{:.2}", sx(p.epoch as f64), sy(p.min)));
            let band: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
                band.join(" ")
            );
            let line: Vec<String> = pts
                .iter()
                .map(|p| format!("{:.2},{:.2}", sx(p.epoch as f64), sy(p.mean)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
                line.join(" ")
            );
        } else if let Some(p) = pts.first() {
            let (x, y) = (sx(p.epoch as f64), sy(p.mean));
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/><circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"/>"#,
                sy(p.min),
                sy(p.max)
            );
        }
        let ly = TOP + 14.0 + 20.0 * k as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<estimator>_<quantity>.svg` for H(F), I(X,F), I(Y,F) and
/// I(X̄,F), with one series per layer, plus `loss.svg`. `cap` adds the
/// reference line to the I(X,F) charts. An empty trace writes nothing.
pub fn emit_charts(trace: &FlowTrace, out_dir: &Path, cap: Option<f64>) -> Result<Vec<PathBuf>> {
    if trace.is_empty() {
        eprintln!("warning: empty trace, no charts written");
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(out_dir)?;
    let layers = trace.layers();
    let last = *layers.last().expect("non-empty trace");
    let layer_name = |l: usize| if l == last { "f_Y".to_string() } else { format!("f_{}", l + 1) };
    let mut written = Vec::new();
    let estimators = trace.estimators();
    for &est in &estimators {
        for q in [Quantity::HF, Quantity::IX, Quantity::IY, Quantity::IXbar] {
            let series: Vec<ChartSeries> = layers
                .iter()
                .map(|&l| ChartSeries {
                    label: layer_name(l),
                    points: seed_summary(trace, est, l, q),
                })
                .collect();
            let svg = render_line_chart(
                &format!("{} ({est})", q.label()),
                &format!("{} [bits]", q.label()),
                &series,
                if q == Quantity::IX { cap } else { None },
            );
            let path = out_dir.join(format!("{est}_{}.svg", q.slug()));
            std::fs::write(&path, svg)?;
            written.push(path);
        }
    }
    let est = estimators[0];
    let series = [Quantity::Loss, Quantity::TrainError].map(|q| ChartSeries {
        label: q.label().to_string(),
        points: seed_summary(trace, est, layers[0], q),
    });
    let path = out_dir.join("loss.svg");
    std::fs::write(&path, render_line_chart("training loss and error", "nats / fraction", &series, None))?;
    written.push(path);
    Ok(written)
}

fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(epoch: usize, v: f64) -> CurvePoint {
        CurvePoint {
            epoch,
            mean: v,
            min: v - 0.1,
            max: v + 0.1,
            seeds: 2,
        }
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 10.0, 5), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(fmt_tick(2.5), "2.5");
        assert_eq!(fmt_tick(3.0), "3");
    }

    #[test]
    fn cap_extends_range_and_single_point_renders() {
        let s = vec![ChartSeries {
            label: "f_1".into(),
            points: vec![pt(0, 0.5)],
        }];
        let svg = render_line_chart("t", "bits", &s, Some(2.38));
        assert!(svg.contains("H(X) = 2.38"));
        assert!(svg.contains("<circle"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn series_get_bands_and_lines() {
        let s: Vec<ChartSeries> = (0..3)
            .map(|k| ChartSeries {
                label: format!("f_{k}"),
                points: vec![pt(0, k as f64), pt(5, k as f64 + 1.0)],
            })
            .collect();
        let svg = render_line_chart("a < b", "bits", &s, None);
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert_eq!(svg.matches("<polygon").count(), 3);
        assert!(svg.contains("a &lt; b"));
    }
}
