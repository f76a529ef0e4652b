//! Path-spot detection in angular-delay modulus images and the mapping from
//! box centres back to normalised angle/delay.

mod builtin;
mod external;
pub mod stub;

pub use builtin::{detect_peaks_builtin, PeakDetectorConfig};
pub use external::{detect_external, detect_external_batch, ExternalDetector, DEFAULT_PROMPT};

use crate::{Error, Result};

/// A detected spot: box centre in pixels (`w` along angle, `h` along delay),
/// the box itself and a confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub center_w: f64,
    pub center_h: f64,
    /// `(x0, y0, x1, y1)`, origin top-left.
    pub bbox: [f64; 4],
    pub confidence: f64,
}

impl Detection {
    /// Builds a detection from a box, taking its midpoint as the centre.
    pub fn from_box(bbox: [f64; 4], confidence: f64) -> Self {
        Detection {
            center_w: 0.5 * (bbox[0] + bbox[2]),
            center_h: 0.5 * (bbox[1] + bbox[3]),
            bbox,
            confidence,
        }
    }

    pub fn in_bounds(&self, width: usize, height: usize) -> bool {
        (0.0..width as f64).contains(&self.center_w) && (0.0..height as f64).contains(&self.center_h)
    }
}

/// Estimated normalised angle and delay of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectedPath {
    pub angle: f64,
    pub delay: f64,
}

impl DetectedPath {
    pub fn new(angle: f64, delay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&angle) || !(0.0..1.0).contains(&delay) {
            return Err(Error::domain(format!("path ({angle}, {delay}) outside [0, 1)^2")));
        }
        Ok(DetectedPath { angle, delay })
    }
}

/// Box centre to path parameters: `angle = (1 − w/βM) mod 1`, `delay = h/γN`.
pub fn bbox_to_path(det: &Detection, beta_m: usize, gamma_n: usize) -> Result<DetectedPath> {
    if !det.in_bounds(beta_m, gamma_n) {
        return Err(Error::domain(format!(
            "detection centre ({}, {}) outside {beta_m}x{gamma_n} image",
            det.center_w, det.center_h
        )));
    }
    let bm = beta_m as f64;
    let angle = (bm - det.center_w).rem_euclid(bm) / bm;
    let delay = det.center_h / gamma_n as f64;
    DetectedPath::new(angle, delay)
}
