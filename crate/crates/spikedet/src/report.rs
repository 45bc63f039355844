//! Figures and summary tables rendered from stored results.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::formats::{EfficiencyTable, ResultRow};

const PANEL_W: f64 = 260.0;
const PANEL_H: f64 = 200.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Detector names in first-seen order.
fn detectors(rows: &[ResultRow]) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::new();
    for r in rows {
        if !out.contains(&r.detector.as_str()) {
            out.push(&r.detector);
        }
    }
    out
}

fn noise_range(rows: &[ResultRow]) -> (f64, f64) {
    let lo = rows.iter().map(|r| r.noise).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.noise).fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        (lo - 0.05, lo + 0.05)
    } else {
        (lo, hi)
    }
}

/// Three panels (S, FDR, A against noise), one polyline per detector.
pub fn metrics_svg(rows: &[ResultRow]) -> String {
    let dets = detectors(rows);
    let width = 3.0 * (PANEL_W + MARGIN) + MARGIN;
    let height = PANEL_H + 2.0 * MARGIN + 18.0 * dets.len() as f64 + 10.0;
    let (x0, x1) = noise_range(rows);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    let panels: [(&str, fn(&ResultRow) -> Option<f64>); 3] = [
        ("Sensitivity S", |r| r.metrics.sensitivity),
        ("False detection rate FDR", |r| r.metrics.fdr),
        ("Accuracy A", |r| r.metrics.accuracy),
    ];
    for (p, (title, get)) in panels.iter().enumerate() {
        let left = MARGIN + p as f64 * (PANEL_W + MARGIN);
        let top = MARGIN;
        let px = |x: f64| left + (x - x0) / (x1 - x0) * PANEL_W;
        let py = |y: f64| top + (1.0 - y) * PANEL_H;
        writeln!(
            s,
            r#"<rect x="{left:.1}" y="{top:.1}" width="{PANEL_W:.1}" height="{PANEL_H:.1}" fill="none" stroke="black"/>"#
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-weight="bold">{title}</text>"#,
            left + PANEL_W / 2.0,
            top - 10.0
        )
        .unwrap();
        for k in 0..=5 {
            let y = k as f64 / 5.0;
            writeln!(
                s,
                r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{y:.1}</text>"##,
                left,
                py(y),
                left + PANEL_W,
                py(y),
                left - 4.0,
                py(y) + 4.0
            )
            .unwrap();
        }
        let mut ticks: Vec<f64> = rows.iter().map(|r| r.noise).collect();
        ticks.sort_by(f64::total_cmp);
        ticks.dedup();
        for x in ticks {
            writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x:.2}</text>"#,
                px(x),
                top + PANEL_H + 14.0
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">noise std</text>"#,
            left + PANEL_W / 2.0,
            top + PANEL_H + 30.0
        )
        .unwrap();
        for (d, name) in dets.iter().enumerate() {
            let color = COLORS[d % COLORS.len()];
            let mut pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.detector == *name)
                .filter_map(|r| get(r).map(|v| (r.noise, v)))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let path: Vec<String> = pts
                .iter()
                .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y)))
                .collect();
            writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                path.join(" ")
            )
            .unwrap();
            for &(x, y) in &pts {
                writeln!(
                    s,
                    r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                    px(x),
                    py(y)
                )
                .unwrap();
            }
        }
    }
    for (d, name) in dets.iter().enumerate() {
        let y = PANEL_H + 2.0 * MARGIN + 18.0 * d as f64;
        let color = COLORS[d % COLORS.len()];
        writeln!(
            s,
            r#"<line x1="{MARGIN:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{name}</text>"#,
            MARGIN + 24.0,
            MARGIN + 30.0,
            y + 4.0
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn input_kind(detector: &str) -> &'static str {
    match detector {
        "ann-spd" => "2-channel PCM frames",
        "ev-spd" => "PCM events",
        _ => "1-channel PCM events",
    }
}

/// Characteristics per detector: input, training, compression and accuracy range.
pub fn characteristics_markdown(rows: &[ResultRow]) -> String {
    let mut s = String::from(
        "| Detector | Input data | Training | Compression ratio | Accuracy range |\n|---|---|---|---|---|\n",
    );
    for name in detectors(rows) {
        let mine: Vec<&ResultRow> = rows.iter().filter(|r| r.detector == name).collect();
        let accs: Vec<f64> = mine.iter().filter_map(|r| r.metrics.accuracy).collect();
        let range = if accs.is_empty() {
            "undefined".to_owned()
        } else {
            let lo = accs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            format!("{lo:.3}-{hi:.3}")
        };
        // Compression at the noisiest level, where the comparison matters most.
        let cr = mine
            .iter()
            .max_by(|a, b| a.noise.total_cmp(&b.noise))
            .and_then(|r| r.compression_ratio)
            .map_or("undefined".to_owned(), |c| {
                if c.is_infinite() {
                    "inf".to_owned()
                } else {
                    format!("{c:.2}")
                }
            });
        let training = if name == "ev-spd" { "No" } else { "Yes" };
        writeln!(s, "| {name} | {} | {training} | {cr} | {range} |", input_kind(name)).unwrap();
    }
    s
}

/// Accuracy per detector (rows) and noise level (columns).
pub fn accuracy_markdown(rows: &[ResultRow]) -> String {
    let mut levels: Vec<f64> = rows.iter().map(|r| r.noise).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut grid: BTreeMap<(usize, usize), String> = BTreeMap::new();
    let dets = detectors(rows);
    for r in rows {
        let d = dets.iter().position(|n| *n == r.detector).unwrap();
        let l = levels.iter().position(|&x| x == r.noise).unwrap();
        let cell = r
            .metrics
            .accuracy
            .map_or("undefined".to_owned(), |a| format!("{a:.4}"));
        grid.insert((d, l), cell);
    }
    let mut s = String::from("| Detector |");
    for l in &levels {
        write!(s, " σ={l:.2} |").unwrap();
    }
    s.push_str("\n|---|");
    s.push_str(&"---|".repeat(levels.len()));
    s.push('\n');
    for (d, name) in dets.iter().enumerate() {
        write!(s, "| {name} |").unwrap();
        for l in 0..levels.len() {
            write!(s, " {} |", grid.get(&(d, l)).map_or("", String::as_str)).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn efficiency_markdown(table: &EfficiencyTable) -> String {
    let mut s = String::from("| Metric |");
    for c in &table.columns {
        write!(s, " {c} |").unwrap();
    }
    s.push_str("\n|---|");
    s.push_str(&"---|".repeat(table.columns.len()));
    s.push('\n');
    for (metric, values) in &table.rows {
        write!(s, "| {metric} |").unwrap();
        for v in values {
            write!(s, " {v} |").unwrap();
        }
        s.push('\n');
    }
    s
}
