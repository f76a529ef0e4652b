use nalgebra::DMatrix;

use super::Detection;
use crate::{Error, Result};

/// Settings for the greedy non-maximum-suppression detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakDetectorConfig {
    /// Stop once the next peak falls below this fraction of the global max.
    pub threshold_ratio: f64,
    /// Half-width of the suppression window along the angle axis.
    pub suppression_radius_w: usize,
    /// Half-width of the suppression window along the delay axis.
    pub suppression_radius_h: usize,
    pub max_peaks: usize,
    /// When set, return this many peaks regardless of the threshold.
    pub known_count: Option<usize>,
}

impl PeakDetectorConfig {
    /// Defaults for a map oversampled by `beta` (angle) and `gamma` (delay):
    /// windows of `±2β × ±2γ`, which covers the Dirichlet main lobe.
    pub fn for_oversampling(beta: usize, gamma: usize) -> Self {
        PeakDetectorConfig {
            threshold_ratio: 0.2,
            suppression_radius_w: (2 * beta).max(1),
            suppression_radius_h: (2 * gamma).max(1),
            max_peaks: 20,
            known_count: None,
        }
    }

    pub fn with_known_count(mut self, count: usize) -> Self {
        self.known_count = Some(count);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_ratio > 0.0 && self.threshold_ratio <= 1.0) {
            return Err(Error::domain("threshold_ratio must lie in (0, 1]"));
        }
        if self.suppression_radius_w == 0 || self.suppression_radius_h == 0 {
            return Err(Error::domain("suppression radii must be at least 1"));
        }
        if self.max_peaks == 0 || self.known_count == Some(0) {
            return Err(Error::domain("peak limits must be at least 1"));
        }
        Ok(())
    }
}

/// Position and value of the largest entry; ties go to the smallest `(h, w)`.
fn argmax(m: &DMatrix<f64>) -> (usize, usize, f64) {
    let (rows, cols) = m.shape();
    let mut best = (0, 0, f64::NEG_INFINITY);
    for h in 0..rows {
        for w in 0..cols {
            let v = m[(h, w)];
            if v > best.2 {
                best = (h, w, v);
            }
        }
    }
    best
}

/// Greedy peak picking with circular suppression on both axes.
///
/// `norm` is a `delay × angle` image. Each iteration takes the global maximum,
/// records it and zeroes a `±radius` window around it with wrap-around.
pub fn detect_peaks_builtin(norm: &DMatrix<f64>, cfg: &PeakDetectorConfig) -> Result<Vec<Detection>> {
    cfg.validate()?;
    let (rows, cols) = norm.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::domain("image must be non-empty"));
    }
    let mut work = norm.clone();
    let (_, _, global) = argmax(&work);
    if !(global > 0.0) {
        return Ok(Vec::new());
    }
    let limit = cfg.known_count.unwrap_or(cfg.max_peaks);
    let floor = cfg.threshold_ratio * global;
    let (rw, rh) = (cfg.suppression_radius_w, cfg.suppression_radius_h);

    let mut out = Vec::new();
    while out.len() < limit {
        let (h, w, v) = argmax(&work);
        if v <= 0.0 {
            break;
        }
        if cfg.known_count.is_none() && v < floor {
            break;
        }
        let bbox = [
            w.saturating_sub(rw) as f64,
            h.saturating_sub(rh) as f64,
            (w + rw).min(cols - 1) as f64,
            (h + rh).min(rows - 1) as f64,
        ];
        out.push(Detection {
            center_w: w as f64,
            center_h: h as f64,
            bbox,
            confidence: v,
        });
        // A window wider than the image just clears the whole axis.
        let span_h = (2 * rh + 1).min(rows);
        let span_w = (2 * rw + 1).min(cols);
        for dh in 0..span_h {
            let hh = (h + rows * (rh / rows + 1) - rh + dh) % rows;
            for dw in 0..span_w {
                let ww = (w + cols * (rw / cols + 1) - rw + dw) % cols;
                work[(hh, ww)] = 0.0;
            }
        }
    }
    Ok(out)
}
