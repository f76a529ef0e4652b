//! Gain fitting on detected paths, channel reconstruction, the LS and LMMSE
//! baselines, and NMSE.

use nalgebra::DMatrix;

use crate::channel::{accumulate_paths, delay_vector, steering_vector, ChannelMatrix, PilotObservation};
use crate::detection::{bbox_to_path, DetectedPath, Detection};
use crate::{CMatrix, CVector, Complex64, Error, Result};

/// Least-squares path gains.
#[derive(Debug, Clone, PartialEq)]
pub struct GainFit {
    pub gains: Vec<Complex64>,
    /// `‖vec(Y)/√P − A·α̂‖²`.
    pub residual_energy: f64,
    /// `(max |R_ii| / min |R_ii|)²` of the dictionary's QR factor, a cheap
    /// stand-in for the Gram matrix condition number.
    pub condition_hint: f64,
}

/// Relative pivot size below which the dictionary counts as rank deficient.
const RANK_TOL: f64 = 1e-9;

fn dictionary(paths: &[DetectedPath], m: usize, n: usize) -> Result<CMatrix> {
    let mut a = CMatrix::zeros(m * n, paths.len());
    for (l, p) in paths.iter().enumerate() {
        let sv = steering_vector(p.angle, m)?;
        let dv = delay_vector(p.delay, n)?;
        for (j, bj) in dv.iter().enumerate() {
            for (i, ai) in sv.iter().enumerate() {
                a[(i + j * m, l)] = ai * bj;
            }
        }
    }
    Ok(a)
}

fn most_coherent_partner(a: &CMatrix, col: usize) -> usize {
    let c = a.column(col);
    (0..col)
        .max_by(|&x, &y| {
            let cx = a.column(x).dotc(&c).norm() / a.column(x).norm();
            let cy = a.column(y).dotc(&c).norm() / a.column(y).norm();
            cx.total_cmp(&cy)
        })
        .unwrap_or(0)
}

/// Gains minimising `‖vec(Y)/√P − A·α‖₂`, where column `l` of `A` is
/// `vec(a(angle_l)·b(delay_l)ᵀ)`. Solved through a Householder QR of `A`.
pub fn ls_gains(y: &PilotObservation, paths: &[DetectedPath]) -> Result<GainFit> {
    let (m, n) = (y.num_antennas(), y.num_subcarriers());
    if paths.is_empty() {
        return Err(Error::domain("at least one path is required"));
    }
    if paths.len() > m * n {
        return Err(Error::domain(format!("{} paths exceed {} observations", paths.len(), m * n)));
    }
    if !(y.pilot_power > 0.0) {
        return Err(Error::domain("pilot power must be positive"));
    }
    let a = dictionary(paths, m, n)?;
    let scale = 1.0 / y.pilot_power.sqrt();
    let b = CVector::from_iterator(m * n, y.entries.iter().map(|z| z * scale));

    let qr = a.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..paths.len()).map(|i| r[(i, i)].norm()).collect();
    let rmax = diag.iter().copied().fold(0.0, f64::max);
    if let Some(bad) = diag.iter().position(|&d| d <= RANK_TOL * rmax) {
        let other = most_coherent_partner(&a, bad);
        return Err(Error::DegenerateDictionary {
            first: other.min(bad),
            second: other.max(bad),
        });
    }
    let rhs = qr.q().adjoint() * &b;
    let gains = r
        .solve_upper_triangular(&rhs)
        .ok_or(Error::DegenerateDictionary { first: 0, second: 0 })?;
    let residual = &b - &a * &gains;
    let rmin = diag.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(GainFit {
        gains: gains.iter().copied().collect(),
        residual_energy: residual.norm_squared(),
        condition_hint: (rmax / rmin).powi(2),
    })
}

/// `Ĥ = Σ α̂_l·a(angle_l)·b(delay_l)ᵀ`; the same accumulation as
/// [`crate::channel::synth_channel`].
pub fn reconstruct(paths: &[DetectedPath], gains: &[Complex64], m: usize, n: usize) -> Result<ChannelMatrix> {
    if paths.len() != gains.len() {
        return Err(Error::domain(format!("{} paths but {} gains", paths.len(), gains.len())));
    }
    if m == 0 || n == 0 {
        return Err(Error::domain("array dimensions must be positive"));
    }
    let mut h = CMatrix::zeros(m, n);
    accumulate_paths(&mut h, paths.iter().zip(gains).map(|(p, g)| (*g, p.angle, p.delay)))?;
    ChannelMatrix::new(h)
}

/// Detected boxes → path parameters → LS gains → reconstructed channel.
///
/// An empty detection list yields the all-zero estimate.
pub fn estimate_from_detections(
    y: &PilotObservation,
    detections: &[Detection],
    beta: usize,
    gamma: usize,
) -> Result<ChannelMatrix> {
    let (m, n) = (y.num_antennas(), y.num_subcarriers());
    let paths = detections
        .iter()
        .map(|d| bbox_to_path(d, beta * m, gamma * n))
        .collect::<Result<Vec<_>>>()?;
    if paths.is_empty() {
        return ChannelMatrix::new(CMatrix::zeros(m, n));
    }
    let fit = ls_gains(y, &paths)?;
    reconstruct(&paths, &fit.gains, m, n)
}

/// `Ĥ = Y/√P`.
pub fn ls_estimate(y: &PilotObservation) -> Result<ChannelMatrix> {
    if !(y.pilot_power > 0.0) {
        return Err(Error::domain("pilot power must be positive"));
    }
    let s = 1.0 / y.pilot_power.sqrt();
    ChannelMatrix::new(y.entries.map(|z| z * s))
}

/// Antenna-domain spatial covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    pub antenna_cov: CMatrix,
    pub sample_count: usize,
}

impl CovarianceModel {
    pub fn dim(&self) -> usize {
        self.antenna_cov.nrows()
    }

    /// `c·I`, handy for tests and as a non-informative prior.
    pub fn scaled_identity(m: usize, c: f64) -> Self {
        CovarianceModel {
            antenna_cov: CMatrix::identity(m, m) * Complex64::new(c, 0.0),
            sample_count: 1,
        }
    }

    /// Checks Hermitian symmetry (1e-10) and positive semi-definiteness
    /// (eigenvalues ≥ −1e-8·trace).
    pub fn validate(&self) -> Result<()> {
        let r = &self.antenna_cov;
        if !r.is_square() {
            return Err(Error::domain("covariance must be square"));
        }
        let asym = (r - r.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if asym > 1e-10 {
            return Err(Error::domain(format!("covariance not Hermitian (deviation {asym:e})")));
        }
        let trace: f64 = (0..r.nrows()).map(|i| r[(i, i)].re).sum();
        let eig = r.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-8 * trace.abs() {
            return Err(Error::domain(format!("covariance has negative eigenvalue {min:e}")));
        }
        Ok(())
    }
}

/// `R = (1/(S·N))·Σ_s H_s·H_sᴴ`, Hermitian-symmetrised.
pub fn estimate_covariance(samples: &[ChannelMatrix]) -> Result<CovarianceModel> {
    if samples.len() < 2 {
        return Err(Error::domain("covariance estimation needs at least two samples"));
    }
    let (m, n) = (samples[0].num_antennas(), samples[0].num_subcarriers());
    let mut r = CMatrix::zeros(m, m);
    for (i, s) in samples.iter().enumerate() {
        if (s.num_antennas(), s.num_subcarriers()) != (m, n) {
            return Err(Error::domain(format!(
                "sample {i} is {}x{}, expected {m}x{n}",
                s.num_antennas(),
                s.num_subcarriers()
            )));
        }
        let h = s.entries();
        r.gemm(Complex64::new(1.0, 0.0), h, &h.adjoint(), Complex64::new(1.0, 0.0));
    }
    let norm = Complex64::new(1.0 / (samples.len() * n) as f64, 0.0);
    let r = (&r + r.adjoint()) * (norm * 0.5);
    Ok(CovarianceModel {
        antenna_cov: r,
        sample_count: samples.len(),
    })
}

/// Per-subcarrier antenna-domain LMMSE: `ĥ_n = R·(R + σ²/P·I)⁻¹·y_n/√P`.
/// Falls back to [`ls_estimate`] for a noiseless observation.
pub fn lmmse_estimate(y: &PilotObservation, cov: &CovarianceModel) -> Result<ChannelMatrix> {
    let m = y.num_antennas();
    if cov.dim() != m {
        return Err(Error::domain(format!("covariance is {0}x{0}, observation has {m} antennas", cov.dim())));
    }
    if y.noise_variance <= 0.0 {
        return ls_estimate(y);
    }
    let x = ls_estimate(y)?.into_entries();
    let shrink = y.noise_variance / y.pilot_power;
    let r = &cov.antenna_cov;
    let reg = r + CMatrix::identity(m, m) * Complex64::new(shrink, 0.0);
    let z = match reg.clone().cholesky() {
        Some(ch) => ch.solve(&x),
        None => reg
            .lu()
            .solve(&x)
            .ok_or_else(|| Error::domain("regularised covariance is singular"))?,
    };
    ChannelMatrix::new(r * z)
}

/// Normalised mean square error of one estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nmse {
    pub linear: f64,
    pub db: f64,
}

/// `‖H − Ĥ‖²/‖H‖²`, linear and in dB.
pub fn nmse(truth: &ChannelMatrix, estimate: &ChannelMatrix) -> Result<Nmse> {
    let (t, e) = (truth.entries(), estimate.entries());
    if t.shape() != e.shape() {
        return Err(Error::domain(format!("shape mismatch {:?} vs {:?}", t.shape(), e.shape())));
    }
    let denom = truth.energy();
    if denom <= 0.0 {
        return Err(Error::domain("reference channel has zero norm"));
    }
    let num: f64 = t.iter().zip(e.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
    let linear = num / denom;
    Ok(Nmse {
        linear,
        db: 10.0 * linear.log10(),
    })
}

/// Convenience for callers holding real matrices (used by tests).
pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}
