//! Minimal deterministic SVG line plots of harness CSV output.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// NMSE (dB) against SNR, one series per method and path count.
    Ce,
    /// Final mean error against SNR, one series per method.
    Loc,
    /// Test accuracy against epoch.
    Har,
}

impl FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ce" | "ce_sweep" | "ce-sweep" => Ok(PlotKind::Ce),
            "loc" => Ok(PlotKind::Loc),
            "har" => Ok(PlotKind::Har),
            other => Err(format!("unknown plot kind {other:?} (expected ce, loc or har)")),
        }
    }
}

struct Table {
    header: Vec<String>,
    /// `(line number, cells)`.
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, head) = lines.next().ok_or(Error::EmptyInput)?;
        let header: Vec<String> = head.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (no, l) in lines {
            let cells: Vec<String> = l.split(',').map(|s| s.trim().to_string()).collect();
            if cells.len() != header.len() {
                return Err(Error::parse(
                    no,
                    cells.len().min(header.len()) + 1,
                    format!("expected {} cells, found {}", header.len(), cells.len()),
                ));
            }
            rows.push((no, cells));
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Table { header, rows })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(1, 1, format!("missing column {name:?}")))
    }

    fn num(&self, row: &(usize, Vec<String>), col: usize) -> Result<f64> {
        row.1[col]
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::parse(row.0, col + 1, format!("{:?} is not a finite number", row.1[col])))
    }
}

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
}

fn push(series: &mut Vec<Series>, name: String, x: f64, y: f64) {
    match series.iter_mut().find(|s| s.name == name) {
        Some(s) => s.points.push((x, y)),
        None => series.push(Series {
            name,
            points: vec![(x, y)],
        }),
    }
}

fn collect(table: &Table, kind: PlotKind) -> Result<(Vec<Series>, &'static str, &'static str)> {
    let mut series = Vec::new();
    match kind {
        PlotKind::Ce => {
            let (s, l, m, v) = (
                table.col("snr_db")?,
                table.col("path_count")?,
                table.col("method")?,
                table.col("mean_nmse_db")?,
            );
            for row in &table.rows {
                let name = format!("{} L={}", row.1[m], row.1[l]);
                push(&mut series, name, table.num(row, s)?, table.num(row, v)?);
            }
            Ok((series, "SNR (dB)", "NMSE (dB)"))
        }
        PlotKind::Loc => {
            let (s, m, e, v) = (
                table.col("snr_db")?,
                table.col("method")?,
                table.col("epoch")?,
                table.col("mean_error_m")?,
            );
            // Keep the last epoch of every (snr, method) pair.
            let mut last: Vec<(String, f64, f64, f64)> = Vec::new();
            for row in &table.rows {
                let (snr, epoch, err) = (table.num(row, s)?, table.num(row, e)?, table.num(row, v)?);
                match last.iter_mut().find(|(n, x, _, _)| *n == row.1[m] && *x == snr) {
                    Some(entry) if epoch >= entry.2 => (entry.2, entry.3) = (epoch, err),
                    Some(_) => {}
                    None => last.push((row.1[m].clone(), snr, epoch, err)),
                }
            }
            for (name, snr, _, err) in last {
                push(&mut series, name, snr, err);
            }
            Ok((series, "SNR (dB)", "mean error (m)"))
        }
        PlotKind::Har => {
            let (e, a) = (table.col("epoch")?, table.col("test_accuracy")?);
            for row in &table.rows {
                push(&mut series, "test accuracy".into(), table.num(row, e)?, table.num(row, a)?);
            }
            Ok((series, "epoch", "accuracy"))
        }
    }
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders harness CSV output as an SVG document. Identical input gives
/// identical bytes.
pub fn emit_plot(csv: &str, kind: PlotKind) -> Result<String> {
    let table = Table::parse(csv)?;
    let (mut series, xlabel, ylabel) = collect(&table, kind)?;
    for s in &mut series {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let (x0, x1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_T + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let w = &mut s;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .expect("string write");
    writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).expect("string write");
    writeln!(
        w,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    )
    .expect("string write");
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        writeln!(
            w,
            r##"<line x1="{px:.2}" y1="{MARGIN_T}" x2="{px:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            MARGIN_T + ph
        )
        .expect("string write");
        writeln!(
            w,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{xv:.2}</text>"#,
            MARGIN_T + ph + 16.0
        )
        .expect("string write");
        writeln!(
            w,
            r##"<line x1="{MARGIN_L}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#dddddd"/>"##,
            MARGIN_L + pw
        )
        .expect("string write");
        writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.2}</text>"#,
            MARGIN_L - 6.0,
            py + 4.0
        )
        .expect("string write");
    }
    writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 12.0
    )
    .expect("string write");
    writeln!(
        w,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{ylabel}</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0
    )
    .expect("string write");
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        writeln!(
            w,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        )
        .expect("string write");
        for &(x, y) in &ser.points {
            writeln!(w, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y)).expect("string write");
        }
        let ly = MARGIN_T + 10.0 + 18.0 * i as f64;
        let lx = MARGIN_L + pw + 12.0;
        writeln!(
            w,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        )
        .expect("string write");
        writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&ser.name)
        )
        .expect("string write");
    }
    s.push_str("</svg>\n");
    Ok(s)
}
