//! Multipath spatial-frequency channels on a uniform linear array with OFDM
//! subcarriers, and noisy pilot observations of them.
//!
//! Angles and delays are normalised to `[0, 1)`: `angle = (d/λ)·sin θ` and
//! `delay = Δf·τ`. A path contributes `gain · a(angle) · b(delay)ᵀ` to the
//! `M × N` channel, where `a` and `b` are unit-modulus phase ramps.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{seed, CMatrix, Complex64, Error, Result};

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathTriplet {
    pub gain: Complex64,
    pub angle: f64,
    pub delay: f64,
}

impl PathTriplet {
    pub fn new(gain: Complex64, angle: f64, delay: f64) -> Result<Self> {
        let p = PathTriplet { gain, angle, delay };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit_interval("angle", self.angle)?;
        check_unit_interval("delay", self.delay)?;
        if !(self.gain.re.is_finite() && self.gain.im.is_finite()) {
            return Err(Error::domain("path gain must be finite"));
        }
        Ok(())
    }
}

fn check_unit_interval(what: &str, v: f64) -> Result<()> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} {v} outside [0, 1)")))
    }
}

/// Spatial-frequency CSI `H` (antennas × subcarriers).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: CMatrix,
}

impl ChannelMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::domain("channel matrix must be non-empty"));
        }
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::domain("channel entries must be finite"));
        }
        Ok(ChannelMatrix { entries })
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn num_antennas(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.entries.ncols()
    }

    /// Squared Frobenius norm.
    pub fn energy(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Received pilot `Y = √P·H + W` together with the power and noise settings
/// that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    pub entries: CMatrix,
    pub pilot_power: f64,
    pub noise_variance: f64,
    pub snr_db: f64,
}

impl PilotObservation {
    pub fn num_antennas(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.entries.ncols()
    }
}

/// Per-entry noise variance for a given SNR: `σ² = P·10^(−snr/10)`.
pub fn noise_variance(pilot_power: f64, snr_db: f64) -> f64 {
    pilot_power * 10f64.powf(-snr_db / 10.0)
}

fn phase_ramp(x: f64, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|k| {
            if k == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, -2.0 * PI * (k as f64) * x)
            }
        })
        .collect()
}

/// ULA steering vector `a(angle)`, element `k` equal to `exp(−j2πk·angle)`.
pub fn steering_vector(angle: f64, m: usize) -> Result<Vec<Complex64>> {
    check_unit_interval("angle", angle)?;
    if m == 0 {
        return Err(Error::domain("antenna count must be positive"));
    }
    Ok(phase_ramp(angle, m))
}

/// Subcarrier phase vector `b(delay)`, element `k` equal to `exp(−j2πk·delay)`.
pub fn delay_vector(delay: f64, n: usize) -> Result<Vec<Complex64>> {
    check_unit_interval("delay", delay)?;
    if n == 0 {
        return Err(Error::domain("subcarrier count must be positive"));
    }
    Ok(phase_ramp(delay, n))
}

/// Sum of rank-one path contributions `Σ gain·a(angle)·b(delay)ᵀ`.
pub fn synth_channel(paths: &[PathTriplet], m: usize, n: usize) -> Result<ChannelMatrix> {
    if paths.is_empty() {
        return Err(Error::domain("at least one path is required"));
    }
    let mut h = CMatrix::zeros(m, n);
    accumulate_paths(&mut h, paths.iter().map(|p| (p.gain, p.angle, p.delay)))?;
    ChannelMatrix::new(h)
}

/// Adds `gain·a(angle)·b(delay)ᵀ` for every `(gain, angle, delay)` to `h`.
pub(crate) fn accumulate_paths(
    h: &mut CMatrix,
    paths: impl IntoIterator<Item = (Complex64, f64, f64)>,
) -> Result<()> {
    let (m, n) = h.shape();
    for (gain, angle, delay) in paths {
        let a = steering_vector(angle, m)?;
        let b = delay_vector(delay, n)?;
        for (j, bj) in b.iter().enumerate() {
            let gb = gain * bj;
            for (i, ai) in a.iter().enumerate() {
                h[(i, j)] += ai * gb;
            }
        }
    }
    Ok(())
}

/// Grid used to snap sampled paths onto the oversampled DFT bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathGrid {
    pub beta: usize,
    pub gamma: usize,
}

/// Draws `l` random paths.
///
/// Gains are circularly-symmetric complex Gaussian, then rescaled so that the
/// total gain power `Σ|gain|²` is exactly one; angles and delays are uniform
/// on `[0, 1)`, optionally snapped to multiples of `1/(β·m)` and `1/(γ·n)`.
pub fn sample_paths(
    l: usize,
    seed: u64,
    grid: Option<PathGrid>,
    m: usize,
    n: usize,
) -> Result<Vec<PathTriplet>> {
    if l < 1 {
        return Err(Error::domain("path count must be at least 1"));
    }
    if m == 0 || n == 0 {
        return Err(Error::domain("array dimensions must be positive"));
    }
    if let Some(g) = grid {
        if g.beta == 0 || g.gamma == 0 {
            return Err(Error::domain("grid oversampling factors must be positive"));
        }
    }
    let mut rng = seed::rng(seed);
    let scale = (0.5 / l as f64).sqrt();
    let mut paths: Vec<PathTriplet> = (0..l)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let mut angle: f64 = rng.random();
            let mut delay: f64 = rng.random();
            if let Some(g) = grid {
                angle = snap(angle, g.beta * m);
                delay = snap(delay, g.gamma * n);
            }
            PathTriplet {
                gain: Complex64::new(re * scale, im * scale),
                angle,
                delay,
            }
        })
        .collect();
    let total: f64 = paths.iter().map(|p| p.gain.norm_sqr()).sum();
    if total > 0.0 {
        let norm = total.sqrt();
        for p in &mut paths {
            p.gain /= norm;
        }
    }
    Ok(paths)
}

/// Rounds `x` to the nearest multiple of `1/bins`, wrapped into `[0, 1)`.
pub fn snap(x: f64, bins: usize) -> f64 {
    let k = (x * bins as f64).round() as usize % bins;
    k as f64 / bins as f64
}

/// Noisy pilot observation of `h` at the requested SNR.
///
/// `snr_db = +∞` yields a noiseless observation.
pub fn add_pilot_noise(
    h: &ChannelMatrix,
    snr_db: f64,
    pilot_power: f64,
    seed: u64,
) -> Result<PilotObservation> {
    if !(pilot_power > 0.0 && pilot_power.is_finite()) {
        return Err(Error::domain("pilot power must be positive"));
    }
    if snr_db.is_nan() {
        return Err(Error::domain("SNR must not be NaN"));
    }
    let sigma2 = noise_variance(pilot_power, snr_db);
    let amp = pilot_power.sqrt();
    let mut y = h.entries.map(|z| z * amp);
    if sigma2 > 0.0 {
        let std = (sigma2 / 2.0).sqrt();
        let mut rng = seed::rng(seed);
        for z in y.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z += Complex64::new(re * std, im * std);
        }
    }
    Ok(PilotObservation {
        entries: y,
        pilot_power,
        noise_variance: sigma2,
        snr_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_vec_close(got: &[Complex64], want: &[Complex64]) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).norm() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn steering_examples() {
        assert_vec_close(&steering_vector(0.0, 4).unwrap(), &[c(1., 0.); 4]);
        assert_vec_close(
            &steering_vector(0.5, 4).unwrap(),
            &[c(1., 0.), c(-1., 0.), c(1., 0.), c(-1., 0.)],
        );
        assert_vec_close(
            &steering_vector(0.25, 4).unwrap(),
            &[c(1., 0.), c(0., -1.), c(-1., 0.), c(0., 1.)],
        );
        assert!(steering_vector(1.0, 4).is_err());
        assert!(steering_vector(-0.1, 4).is_err());
    }

    #[test]
    fn delay_examples() {
        assert_vec_close(&delay_vector(0.0, 3).unwrap(), &[c(1., 0.); 3]);
        assert_vec_close(
            &delay_vector(0.25, 4).unwrap(),
            &[c(1., 0.), c(0., -1.), c(-1., 0.), c(0., 1.)],
        );
        assert_vec_close(&delay_vector(0.5, 2).unwrap(), &[c(1., 0.), c(-1., 0.)]);
        assert!(delay_vector(1.5, 2).is_err());
    }

    #[test]
    fn first_element_is_exactly_one() {
        for x in [0.0, 0.123, 0.999] {
            assert_eq!(steering_vector(x, 5).unwrap()[0], c(1.0, 0.0));
            assert_eq!(delay_vector(x, 5).unwrap()[0], c(1.0, 0.0));
        }
    }

    #[test]
    fn synth_examples() {
        let one = PathTriplet::new(c(1., 0.), 0.0, 0.0).unwrap();
        let h = synth_channel(&[one], 3, 2).unwrap();
        assert!(h.entries().iter().all(|z| *z == c(1., 0.)));

        let p = PathTriplet::new(c(0., 2.), 0.0, 0.0).unwrap();
        let h = synth_channel(&[p], 2, 2).unwrap();
        assert!(h.entries().iter().all(|z| *z == c(0., 2.)));

        let neg = PathTriplet::new(c(-1., 0.), 0.0, 0.0).unwrap();
        let h = synth_channel(&[one, neg], 4, 4).unwrap();
        assert!(h.entries().iter().all(|z| z.norm() == 0.0));

        assert!(synth_channel(&[], 2, 2).is_err());
    }

    #[test]
    fn sample_paths_deterministic_and_snapped() {
        let a = sample_paths(2, 7, None, 8, 8).unwrap();
        let b = sample_paths(2, 7, None, 8, 8).unwrap();
        assert_eq!(a, b);

        let grid = Some(PathGrid { beta: 4, gamma: 4 });
        let p = sample_paths(1, 3, grid, 64, 64).unwrap();
        let k = p[0].angle * 256.0;
        assert_eq!(k, k.round());
        assert!(sample_paths(0, 1, None, 4, 4).is_err());
    }

    #[test]
    fn sampled_gain_power_is_unit() {
        let p = sample_paths(10, 11, None, 16, 16).unwrap();
        let total: f64 = p.iter().map(|t| t.gain.norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_observation_is_scaled_channel() {
        let p = sample_paths(3, 5, None, 4, 6).unwrap();
        let h = synth_channel(&p, 4, 6).unwrap();
        let y = add_pilot_noise(&h, f64::INFINITY, 4.0, 1).unwrap();
        assert_eq!(y.noise_variance, 0.0);
        assert_eq!(y.entries, h.entries().map(|z| z * 2.0));
        assert!(add_pilot_noise(&h, 0.0, 0.0, 1).is_err());
        assert!(add_pilot_noise(&h, 0.0, -1.0, 1).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let p = sample_paths(3, 5, None, 4, 6).unwrap();
        let h = synth_channel(&p, 4, 6).unwrap();
        let a = add_pilot_noise(&h, 3.0, 1.0, 99).unwrap();
        let b = add_pilot_noise(&h, 3.0, 1.0, 99).unwrap();
        let c = add_pilot_noise(&h, 3.0, 1.0, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
