//! Activity-recognition CSI groups in CSV form.
//!
//! Each group starts with a header row `group,<label>` followed by `T` rows of
//! `M·N` comma-separated modulus values (antenna-major). Blank lines and lines
//! starting with `#` are ignored. Line and column numbers in errors are 1-based.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::imaging::ModulusTensor;
use crate::{seed, Error, Result};

/// Lie down, fall, walk, pick up, run, sit down, stand up.
pub const HAR_CLASSES: usize = 7;

pub fn parse_har_csv(text: &str, t: usize, m: usize, n: usize) -> Result<Vec<(ModulusTensor, usize)>> {
    if t == 0 || m == 0 || n == 0 {
        return Err(Error::domain("tensor dimensions must be positive"));
    }
    let width = m * n;
    let mut out = Vec::new();
    let mut current: Option<(usize, usize, Vec<f64>)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cells = line.split(',');
        let first = cells.next().unwrap_or("").trim();
        if first == "group" {
            if let Some((start, _, data)) = &current {
                return Err(Error::parse(
                    line_no,
                    1,
                    format!("group starting at line {start} has {} of {t} rows", data.len() / width),
                ));
            }
            let label_cell = cells.next().ok_or_else(|| Error::parse(line_no, 2, "missing label"))?;
            if cells.next().is_some() {
                return Err(Error::parse(line_no, 3, "group header has extra cells"));
            }
            let label: usize = label_cell
                .trim()
                .parse()
                .map_err(|_| Error::parse(line_no, 2, format!("label {:?} is not an integer", label_cell.trim())))?;
            if label >= HAR_CLASSES {
                return Err(Error::parse(
                    line_no,
                    2,
                    format!("label {label} outside [0, {HAR_CLASSES})"),
                ));
            }
            current = Some((line_no, label, Vec::with_capacity(t * width)));
            continue;
        }
        let Some((_, label, data)) = current.as_mut() else {
            return Err(Error::parse(line_no, 1, "data row before any group header"));
        };
        let before = data.len();
        for (col, cell) in line.split(',').enumerate() {
            if col >= width {
                return Err(Error::parse(line_no, col + 1, format!("ragged row: expected {width} values")));
            }
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::parse(line_no, col + 1, format!("{:?} is not a number", cell.trim())))?;
            if !v.is_finite() {
                return Err(Error::parse(line_no, col + 1, "value is not finite"));
            }
            data.push(v);
        }
        let got = data.len() - before;
        if got != width {
            return Err(Error::parse(
                line_no,
                got + 1,
                format!("ragged row: {got} values, expected {width}"),
            ));
        }
        if data.len() == t * width {
            let label = *label;
            let (_, _, data) = current.take().expect("group in progress");
            out.push((ModulusTensor::new(t, m, n, data)?, label));
        }
    }
    if let Some((start, _, data)) = current {
        return Err(Error::parse(
            text.lines().count() + 1,
            1,
            format!("group starting at line {start} ends after {} of {t} rows", data.len() / width),
        ));
    }
    Ok(out)
}

pub fn ingest_har_csv(path: &Path, t: usize, m: usize, n: usize) -> Result<Vec<(ModulusTensor, usize)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_har_csv(&text, t, m, n)
}

pub fn write_har_csv(path: &Path, groups: &[(ModulusTensor, usize)]) -> Result<()> {
    let mut s = String::new();
    for (tensor, label) in groups {
        writeln!(s, "group,{label}").expect("string write");
        for row in tensor.data.chunks(tensor.m * tensor.n) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
    }
    std::fs::write(path, s).map_err(|e| Error::file(path, e))
}

/// Synthetic activity groups with a class-specific subcarrier profile and
/// temporal modulation rate, plus Gaussian jitter. Output is grouped by class.
pub fn synthetic_har(per_class: usize, t: usize, m: usize, n: usize, seed: u64) -> Result<Vec<(ModulusTensor, usize)>> {
    if t == 0 || m == 0 || n == 0 {
        return Err(Error::domain("tensor dimensions must be positive"));
    }
    let mut out = Vec::with_capacity(per_class * HAR_CLASSES);
    for class in 0..HAR_CLASSES {
        for i in 0..per_class {
            let mut rng = seed::rng(seed::derive(seed, (class * per_class + i) as u64));
            let phase: f64 = 2.0 * PI * rng.random::<f64>();
            let cycles = (class + 1) as f64;
            let mut data = Vec::with_capacity(t * m * n);
            for ti in 0..t {
                let motion = 0.4 * (2.0 * PI * cycles * ti as f64 / t as f64 + phase).sin();
                for mi in 0..m {
                    for ni in 0..n {
                        let profile = 1.0 + 0.5 * (2.0 * PI * cycles * ni as f64 / n as f64 + mi as f64).cos();
                        let jitter: f64 = rng.sample(StandardNormal);
                        data.push((profile + motion + 0.05 * jitter).max(0.0));
                    }
                }
            }
            out.push((ModulusTensor::new(t, m, n, data)?, class));
        }
    }
    Ok(out)
}
