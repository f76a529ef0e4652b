//! Synthetic geometric localisation data.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{synth_channel, ChannelMatrix, PathTriplet};
use crate::{seed, Error, Result};

/// Relative power of each scatter path with respect to the LOS path.
const SCATTER_REL_DB: f64 = -10.0;
/// Largest normalized delay assigned to the LOS path.
const MAX_LOS_DELAY: f64 = 0.8;
/// Scatter paths arrive up to this much (normalized) later than the LOS path.
const SCATTER_EXCESS_DELAY: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub struct LocScenario {
    pub bs_position: [f64; 3],
    pub region_center: [f64; 3],
    pub region_radius: f64,
    pub num_samples: usize,
    pub antennas: usize,
    pub subcarriers: usize,
}

impl Default for LocScenario {
    fn default() -> Self {
        LocScenario {
            bs_position: [0.0, 0.0, 25.0],
            region_center: [200.0, 50.0, 1.5],
            region_radius: 50.0,
            num_samples: 1000,
            antennas: 56,
            subcarriers: 56,
        }
    }
}

/// One generated user.
#[derive(Debug, Clone)]
pub struct LocUser {
    pub position: [f64; 3],
    pub channel: ChannelMatrix,
    /// Mean per-entry power `‖H‖²/(M·N)`.
    pub channel_power: f64,
    pub los: PathTriplet,
}

impl LocScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.region_radius > 0.0 && self.region_radius.is_finite()) {
            return Err(Error::domain("region radius must be positive"));
        }
        if self.num_samples == 0 || self.antennas == 0 || self.subcarriers == 0 {
            return Err(Error::domain("sample count and array dimensions must be positive"));
        }
        if self.bs_position.iter().chain(&self.region_center).any(|v| !v.is_finite()) {
            return Err(Error::domain("positions must be finite"));
        }
        if self.range(self.region_center) <= self.region_radius {
            return Err(Error::domain("base station must lie outside the user region"));
        }
        Ok(())
    }

    pub fn range(&self, p: [f64; 3]) -> f64 {
        let b = self.bs_position;
        ((p[0] - b[0]).powi(2) + (p[1] - b[1]).powi(2) + (p[2] - b[2]).powi(2)).sqrt()
    }

    /// Range of the farthest point of the region.
    pub fn max_range(&self) -> f64 {
        let (b, c) = (self.bs_position, self.region_center);
        let horiz = (c[0] - b[0]).hypot(c[1] - b[1]) + self.region_radius;
        horiz.hypot(c[2] - b[2])
    }

    /// Line-of-sight path to a user at `p`. The gain is real and positive,
    /// equal to one at the region centre and inversely proportional to range.
    pub fn los_path(&self, p: [f64; 3]) -> PathTriplet {
        let b = self.bs_position;
        let azimuth = (p[1] - b[1]).atan2(p[0] - b[0]);
        let range = self.range(p);
        PathTriplet {
            gain: Complex64::new(self.range(self.region_center) / range, 0.0),
            angle: (0.5 * azimuth.sin()).rem_euclid(1.0),
            delay: range / self.max_range() * MAX_LOS_DELAY,
        }
    }

    /// Maps a position into the unit square spanned by the region's bounding box.
    pub fn normalize_xy(&self, p: [f64; 3]) -> [f64; 2] {
        let (c, r) = (self.region_center, self.region_radius);
        [(p[0] - c[0] + r) / (2.0 * r), (p[1] - c[1] + r) / (2.0 * r)]
    }

    pub fn denormalize_xy(&self, u: [f64; 2]) -> [f64; 2] {
        let (c, r) = (self.region_center, self.region_radius);
        [c[0] - r + 2.0 * r * u[0], c[1] - r + 2.0 * r * u[1]]
    }
}

/// Generates `scenario.num_samples` users, uniform on the disk, each with a
/// LOS path plus `paths_per_user − 1` weaker scatter paths.
///
/// User `i` depends only on `(seed, i)`.
pub fn gen_loc_dataset(scenario: &LocScenario, paths_per_user: usize, seed: u64) -> Result<Vec<LocUser>> {
    scenario.validate()?;
    if paths_per_user == 0 {
        return Err(Error::domain("paths per user must be at least 1"));
    }
    let scatter_amp = 10f64.powf(SCATTER_REL_DB / 20.0);
    (0..scenario.num_samples)
        .map(|i| {
            let mut rng = seed::rng(seed::derive(seed, i as u64));
            let rad = scenario.region_radius * rng.random::<f64>().sqrt();
            let phi = 2.0 * PI * rng.random::<f64>();
            let c = scenario.region_center;
            let position = [c[0] + rad * phi.cos(), c[1] + rad * phi.sin(), c[2]];
            let los = scenario.los_path(position);
            let mut paths = Vec::with_capacity(paths_per_user);
            paths.push(los);
            let amp = los.gain.re * scatter_amp * std::f64::consts::FRAC_1_SQRT_2;
            for _ in 1..paths_per_user {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                paths.push(PathTriplet {
                    gain: Complex64::new(re * amp, im * amp),
                    angle: rng.random(),
                    delay: (los.delay + SCATTER_EXCESS_DELAY * rng.random::<f64>()).rem_euclid(1.0),
                });
            }
            let channel = synth_channel(&paths, scenario.antennas, scenario.subcarriers)?;
            let channel_power = channel.energy() / (scenario.antennas * scenario.subcarriers) as f64;
            Ok(LocUser {
                position,
                channel,
                channel_power,
                los,
            })
        })
        .collect()
}
