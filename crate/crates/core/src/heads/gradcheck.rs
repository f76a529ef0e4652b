use rand::seq::index::sample as sample_indices;

use super::{Head, Loss};
use crate::{seed, Result};

/// Finite-difference step (64-bit arithmetic).
const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared on an absolute scale.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// `max |g_a − g_n| / max(|g_a|, |g_n|, 1e-6)` over the checked parameters.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
}

/// Compares the analytic gradient of one sample's loss with central finite
/// differences. `fraction = 1.0` checks every parameter; smaller values check
/// a seeded random subset (at least one parameter).
pub fn grad_check<H: Head>(head: &H, loss: Loss, sample: &H::Sample, fraction: f64, seed: u64) -> Result<GradCheckReport> {
    let mut analytic = head.zeros_like();
    head.sample_loss(sample, loss, 1.0, Some(&mut analytic))?;
    let total = head.num_params();
    let indices: Vec<usize> = if fraction >= 1.0 {
        (0..total).collect()
    } else {
        let n = ((total as f64 * fraction).ceil() as usize).clamp(1, total);
        let mut v = sample_indices(&mut seed::rng(seed), total, n).into_vec();
        v.sort_unstable();
        v
    };
    let mut probe = head.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked: indices.len(),
    };
    for idx in indices {
        let orig = probe.param(idx);
        probe.set_param(idx, orig + STEP);
        let up = probe.sample_loss(sample, loss, 1.0, None)?;
        probe.set_param(idx, orig - STEP);
        let down = probe.sample_loss(sample, loss, 1.0, None)?;
        probe.set_param(idx, orig);
        let numeric = (up - down) / (2.0 * STEP);
        let exact = analytic.param(idx);
        let abs = (exact - numeric).abs();
        let rel = abs / exact.abs().max(numeric.abs()).max(REL_FLOOR);
        report.max_abs_error = report.max_abs_error.max(abs);
        report.max_rel_error = report.max_rel_error.max(rel);
    }
    Ok(report)
}
