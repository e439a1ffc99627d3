//! Plot-ready summaries of training curves: a smoothed CSV or a standalone
//! SVG line chart.

use std::fmt::Write as _;

use crate::grpo::{StepRecord, TrainingHistory};

pub const SMOOTHING_WINDOW: usize = 10;

type Series = (&'static str, &'static str, fn(&StepRecord) -> f64);

const SERIES: [Series; 4] = [
    ("mean_reward", "#1f77b4", |r| r.mean_reward),
    ("mean_f1", "#2ca02c", |r| r.mean_f1),
    ("sr_known", "#d62728", |r| r.sr_known),
    ("sr_unknown", "#9467bd", |r| r.sr_unknown),
];

/// Trailing moving average over at most `window` points.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for i in 0..xs.len() {
        sum += xs[i];
        if i >= window {
            sum -= xs[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

pub fn smoothed_csv(history: &TrainingHistory, window: usize) -> String {
    let columns: Vec<Vec<f64>> = SERIES
        .iter()
        .map(|(_, _, get)| {
            let raw: Vec<f64> = history.records.iter().map(get).collect();
            moving_average(&raw, window)
        })
        .collect();
    let mut out = String::from("step");
    for (name, _, _) in SERIES {
        let _ = write!(out, ",{name}_ma{window}");
    }
    out.push('\n');
    for (i, r) in history.records.iter().enumerate() {
        let _ = write!(out, "{}", r.step);
        for col in &columns {
            let _ = write!(out, ",{:.6}", col[i]);
        }
        out.push('\n');
    }
    out
}

pub fn svg_chart(history: &TrainingHistory, window: usize) -> String {
    const W: f64 = 640.0;
    const H: f64 = 360.0;
    const PAD: f64 = 40.0;
    let n = history.records.len();
    let x_of = |i: usize| {
        let span = n.saturating_sub(1).max(1) as f64;
        PAD + (W - 2.0 * PAD) * i as f64 / span
    };
    let y_of = |v: f64| H - PAD - (H - 2.0 * PAD) * v.clamp(0.0, 1.0);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    for tick in [0.0, 0.5, 1.0] {
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y:.1}" font-size="10" text-anchor="end">{tick:.1}</text>"#,
            x = PAD - 4.0,
            y = y_of(tick) + 3.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{x}" y="{y}" font-size="11" text-anchor="middle">step (moving average, window {window})</text>"#,
        x = W / 2.0,
        y = H - 8.0
    );
    for (k, (name, color, get)) in SERIES.iter().enumerate() {
        let raw: Vec<f64> = history.records.iter().map(get).collect();
        let points: Vec<String> = moving_average(&raw, window)
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{:.1},{:.1}", x_of(i), y_of(*v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-size="11" fill="{color}">{name}</text>"#,
            x = PAD + 8.0 + 120.0 * k as f64,
            y = PAD - 12.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
