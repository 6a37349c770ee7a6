use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Dataset;
use crate::forecast::TrainedModel;

/// One validation row. `predicted` and `difference` are empty while the model
/// warms up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub timestamp: i64,
    pub actual: f64,
    pub predicted: Option<f64>,
    pub difference: Option<f64>,
}

/// Predictions against targets for every row of `ds`. `dataset_hash` is the
/// schema hash recorded with the dataset.
pub fn emit_trace(model: &TrainedModel, ds: &Dataset, dataset_hash: &str) -> Result<Vec<TraceRow>> {
    model.check_schema(dataset_hash)?;
    let pred = model.predict_dataset(ds)?;
    Ok(ds
        .timestamps
        .iter()
        .zip(&ds.targets)
        .zip(pred)
        .map(|((&timestamp, &actual), p)| TraceRow {
            timestamp,
            actual,
            predicted: p,
            difference: p.map(|p| p - actual),
        })
        .collect())
}

pub fn write_trace_csv<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["timestamp", "actual", "predicted", "difference"])?;
    }
    w.flush().map_err(|e| Error::io("<trace>", e))?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

const WIDTH: f64 = 960.0;
const PANEL: f64 = 220.0;
const MARGIN: f64 = 50.0;

/// Self-contained SVG: actual and predicted utilization on top, their
/// difference below.
pub fn render_svg(rows: &[TraceRow], title: &str) -> String {
    let mut s = String::new();
    let height = 2.0 * PANEL + 3.0 * MARGIN;
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="20" font-size="14">{}</text>"#, escape(title));
    let n = rows.len().max(2) as f64 - 1.0;
    let x = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / n;

    let top = MARGIN;
    let bottom = 2.0 * MARGIN + PANEL;
    let y_top = |v: f64| top + PANEL * (1.0 - v.clamp(0.0, 1.0));
    let dmax = rows
        .iter()
        .filter_map(|r| r.difference)
        .fold(0.0f64, |m, d| m.max(d.abs()))
        .max(0.01);
    let y_bot = |d: f64| bottom + PANEL * (0.5 - 0.5 * d / dmax);

    frame(&mut s, top, "utilization", "1", "0");
    frame(&mut s, bottom, "predicted - actual", &format!("{dmax:.3}"), &format!("-{dmax:.3}"));
    let _ = writeln!(
        s,
        r##"<line x1="{MARGIN}" x2="{}" y1="{}" y2="{}" stroke="#999" stroke-dasharray="4"/>"##,
        WIDTH - MARGIN,
        bottom + PANEL / 2.0,
        bottom + PANEL / 2.0
    );

    let actual: Vec<(f64, f64)> = rows.iter().enumerate().map(|(i, r)| (x(i), y_top(r.actual))).collect();
    polyline(&mut s, &[actual], "#1f77b4");
    let pred = segments(rows, |r| r.predicted.map(y_top), &x);
    polyline(&mut s, &pred, "#d62728");
    let diff = segments(rows, |r| r.difference.map(y_bot), &x);
    polyline(&mut s, &diff, "#2ca02c");

    let _ = writeln!(
        s,
        r##"<text x="{}" y="{}" fill="#1f77b4">actual</text><text x="{}" y="{}" fill="#d62728">predicted</text>"##,
        WIDTH - MARGIN - 130.0,
        top - 8.0,
        WIDTH - MARGIN - 70.0,
        top - 8.0
    );
    s.push_str("</svg>\n");
    s
}

fn frame(s: &mut String, y0: f64, label: &str, hi: &str, lo: &str) {
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{y0}" width="{}" height="{PANEL}" fill="none" stroke="#333"/>"##,
        WIDTH - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{hi}</text>"#, MARGIN - 4.0, y0 + 10.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{lo}</text>"#, MARGIN - 4.0, y0 + PANEL);
    let _ = writeln!(s, r#"<text x="{}" y="{}">{label}</text>"#, MARGIN + 4.0, y0 + 14.0);
}

/// Splits a series at missing values.
fn segments(
    rows: &[TraceRow],
    y: impl Fn(&TraceRow) -> Option<f64>,
    x: &impl Fn(usize) -> f64,
) -> Vec<Vec<(f64, f64)>> {
    let mut out = vec![Vec::new()];
    for (i, r) in rows.iter().enumerate() {
        match y(r) {
            Some(v) => out.last_mut().unwrap().push((x(i), v)),
            None if !out.last().unwrap().is_empty() => out.push(Vec::new()),
            None => {}
        }
    }
    out.retain(|p| !p.is_empty());
    out
}

fn polyline(s: &mut String, parts: &[Vec<(f64, f64)>], color: &str) {
    for p in parts {
        s.push_str(r#"<polyline fill="none" stroke-width="1" stroke=""#);
        s.push_str(color);
        s.push_str(r#"" points=""#);
        for (i, (x, y)) in p.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{x:.1},{y:.1}");
        }
        s.push_str("\"/>\n");
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<TraceRow> {
        vec![
            TraceRow { timestamp: 1, actual: 0.5, predicted: None, difference: None },
            TraceRow { timestamp: 4, actual: 0.25, predicted: Some(0.75), difference: Some(0.5) },
        ]
    }

    #[test]
    fn csv_round_trip_keeps_gaps() {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &rows()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("timestamp,actual,predicted,difference\n1,0.5,,\n"));
        assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), rows());
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = render_svg(&rows(), "a<b");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg.matches("<polyline").count(), 3);
    }
}
