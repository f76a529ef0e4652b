//! Property tests for channel synthesis and the angular-delay transform.

use std::f64::consts::PI;

use csi_core::channel::{add_pilot_noise, delay_vector, sample_paths, steering_vector, synth_channel, PathGrid, PathTriplet};
use csi_core::estimation::{ls_estimate, nmse};
use csi_core::imaging::{encode_rgb_colormap, encode_two_channel_zero, modulus_normalize, to_angular_delay};
use csi_core::{CMatrix, Complex64};
use proptest::prelude::*;

fn path_strategy() -> impl Strategy<Value = PathTriplet> {
    (-2.0..2.0f64, -2.0..2.0f64, 0.0..1.0f64, 0.0..1.0f64)
        .prop_map(|(re, im, angle, delay)| PathTriplet::new(Complex64::new(re, im), angle, delay).unwrap())
}

fn cmatrix(m: usize, n: usize, vals: &[(f64, f64)]) -> CMatrix {
    CMatrix::from_fn(m, n, |i, j| {
        let (re, im) = vals[i + j * m];
        Complex64::new(re, im)
    })
}

// ============================================================================
// Steering and delay vectors
// ============================================================================

proptest! {
    #[test]
    fn phase_vectors_have_unit_modulus(x in 0.0..1.0f64, len in 1usize..80) {
        for v in [steering_vector(x, len).unwrap(), delay_vector(x, len).unwrap()] {
            prop_assert_eq!(v[0], Complex64::new(1.0, 0.0));
            for z in &v {
                prop_assert!((z.norm() - 1.0).abs() < 1e-12, "modulus {}", z.norm());
            }
        }
    }
}

#[test]
fn out_of_range_angle_is_rejected() {
    assert!(steering_vector(1.0, 4).is_err());
    assert!(delay_vector(-0.1, 4).is_err());
    assert!(steering_vector(0.5, 0).is_err());
}

// ============================================================================
// synth_channel
// ============================================================================

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Entry (m, n) equals the direct multipath sum.
    #[test]
    fn synth_matches_direct_formula(paths in prop::collection::vec(path_strategy(), 1..6), m in 1usize..12, n in 1usize..12) {
        let h = synth_channel(&paths, m, n).unwrap();
        for i in 0..m {
            for j in 0..n {
                let direct: Complex64 = paths
                    .iter()
                    .map(|p| p.gain * Complex64::from_polar(1.0, -2.0 * PI * (i as f64 * p.angle + j as f64 * p.delay)))
                    .sum();
                let got = h.entries()[(i, j)];
                let scale = paths.iter().map(|p| p.gain.norm()).sum::<f64>().max(1e-12);
                prop_assert!((got - direct).norm() / scale < 1e-12, "entry ({}, {}): {} vs {}", i, j, got, direct);
            }
        }
    }

    #[test]
    fn synth_is_linear_in_gain(p in path_strategy(), sr in -3.0..3.0f64, si in -3.0..3.0f64) {
        let s = Complex64::new(sr, si);
        let base = synth_channel(&[p], 8, 8).unwrap();
        let scaled = synth_channel(&[PathTriplet { gain: p.gain * s, ..p }], 8, 8).unwrap();
        for (a, b) in scaled.entries().iter().zip(base.entries().iter()) {
            prop_assert!((a - b * s).norm() <= 1e-12 * (1.0 + (b * s).norm()));
        }
    }
}

#[test]
fn sampled_gains_have_unit_total_power() {
    for seed in 0..20 {
        let paths = sample_paths(7, seed, None, 16, 16).unwrap();
        let total: f64 = paths.iter().map(|p| p.gain.norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-12, "seed {seed}: total gain power {total}");
    }
}

/// The trivial estimator Y/√P has NMSE 10^(−SNR/10).
#[test]
fn ls_nmse_tracks_noise_law() {
    let snr = 5.0;
    let (m, n, trials) = (16, 16, 1000);
    let mut acc = 0.0;
    for t in 0..trials {
        let paths = sample_paths(4, 2 * t, None, m, n).unwrap();
        let h = synth_channel(&paths, m, n).unwrap();
        let y = add_pilot_noise(&h, snr, 1.0, 2 * t + 1).unwrap();
        acc += nmse(&h, &ls_estimate(&y).unwrap()).unwrap().linear;
    }
    let mean = acc / trials as f64;
    let expected = 10f64.powf(-snr / 10.0);
    assert!((mean / expected - 1.0).abs() < 0.05, "mean NMSE {mean}, expected {expected}");
}

// ============================================================================
// Angular-delay transform
// ============================================================================

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Agrees with the naive triple loop on random 8×8 inputs.
    #[test]
    fn transform_matches_brute_force(vals in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 64), beta in 1usize..4, gamma in 1usize..4) {
        let (m, n) = (8, 8);
        let y = cmatrix(m, n, &vals);
        let map = to_angular_delay(&y, beta, gamma).unwrap();
        let (bm, gn) = (beta * m, gamma * n);
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for p in 0..bm {
            for q in 0..gn {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..m {
                    for j in 0..n {
                        let phase = -2.0 * PI * (i * p) as f64 / bm as f64 + 2.0 * PI * (j * q) as f64 / gn as f64;
                        acc += y[(i, j)] * Complex64::from_polar(1.0, phase);
                    }
                }
                worst = worst.max((map.entries[(p, q)] - acc).norm());
                scale = scale.max(acc.norm());
            }
        }
        prop_assert!(worst <= 1e-10 * scale.max(1.0), "max deviation {}", worst);
    }

    #[test]
    fn transform_is_linear(
        a in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 36),
        b in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 36),
        cr in -2.0..2.0f64,
    ) {
        let (ya, yb) = (cmatrix(6, 6, &a), cmatrix(6, 6, &b));
        let c = Complex64::new(cr, 0.5);
        let lhs = to_angular_delay(&(&ya * c + &yb), 2, 3).unwrap();
        let ta = to_angular_delay(&ya, 2, 3).unwrap();
        let tb = to_angular_delay(&yb, 2, 3).unwrap();
        for ((l, x), y) in lhs.entries.iter().zip(ta.entries.iter()).zip(tb.entries.iter()) {
            prop_assert!((l - (x * c + y)).norm() < 1e-9);
        }
    }

    /// An on-grid path peaks at (h = q, w = (βM − k) mod βM) with modulus M·N·|α|,
    /// whatever the gain's phase.
    #[test]
    fn on_grid_peak_location(k in 0usize..32, q in 0usize..32, mag in 0.1..3.0f64, phase in 0.0..(2.0 * PI)) {
        let (m, n, beta, gamma) = (8, 8, 4, 4);
        let (bm, gn) = (beta * m, gamma * n);
        let gain = Complex64::from_polar(mag, phase);
        let path = PathTriplet::new(gain, k as f64 / bm as f64, q as f64 / gn as f64).unwrap();
        let h = synth_channel(&[path], m, n).unwrap();
        let img = to_angular_delay(&h, beta, gamma).unwrap().modulus_image();
        let (mut bh, mut bw) = (0, 0);
        for r in 0..img.nrows() {
            for c in 0..img.ncols() {
                if img[(r, c)] > img[(bh, bw)] {
                    bh = r;
                    bw = c;
                }
            }
        }
        prop_assert_eq!((bh, bw), (q, (bm - k) % bm));
        let expected = (m * n) as f64 * mag;
        prop_assert!((img[(bh, bw)] - expected).abs() / expected < 1e-8);
    }
}

// ============================================================================
// Encodings
// ============================================================================

#[test]
fn encodings_are_deterministic_and_scale_invariant() {
    let paths = sample_paths(5, 11, Some(PathGrid { beta: 2, gamma: 2 }), 16, 16).unwrap();
    let h = synth_channel(&paths, 16, 16).unwrap();
    let map = to_angular_delay(&h, 2, 2).unwrap();
    let a = encode_rgb_colormap(&modulus_normalize(&map).unwrap()).unwrap();
    let b = encode_rgb_colormap(&modulus_normalize(&map).unwrap()).unwrap();
    assert_eq!(a.pixels, b.pixels, "colormap encoding must be bit-identical on reruns");

    let (img1, p1) = encode_two_channel_zero(&map, 20, 20).unwrap();
    let (img2, p2) = encode_two_channel_zero(&map.scaled(2.0), 20, 20).unwrap();
    assert_eq!(img1.pixels, img2.pixels, "scaling the map must not change pixel content");
    assert!((p2 / p1 - 4.0).abs() < 1e-12, "channel power must scale quadratically: {p1} -> {p2}");
}

#[test]
fn zero_map_gives_zero_image() {
    let map = to_angular_delay(&CMatrix::zeros(4, 4), 2, 2).unwrap();
    let (img, power) = encode_two_channel_zero(&map, 8, 8).unwrap();
    assert!(img.pixels.iter().all(|&p| p == 0));
    assert_eq!(power, 0.0);
}
