//! Deterministic stand-in for a frozen vision backbone.
//!
//! Each output is a seeded Gaussian combination of the image's low-frequency
//! 2-D DFT coefficients (unitary scaling, DC excluded, all three colour
//! planes), squashed with `tanh`. As a map on the flattened pixel buffer this
//! is a linear random projection whose rows are smooth, band-limited random
//! patterns, so nearby image content yields nearby features.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::heads::FeatureVector;
use crate::imaging::CsiImage;
use crate::seed;

/// Highest spatial frequency kept on each axis, in cycles per image.
pub const MOCK_MAX_FREQ: usize = 8;

#[derive(Debug)]
struct Projection {
    height: usize,
    width: usize,
    /// Vertical frequencies `−fh..=fh` and horizontal `0..=fw`.
    fh: usize,
    fw: usize,
    /// `cos`/`sin` tables: `[f][x]` for the width and height axes.
    tw_w: Vec<(f64, f64)>,
    tw_h: Vec<(f64, f64)>,
    /// `K × coeffs`, row-major.
    weights: Vec<f64>,
    coeffs: usize,
}

impl Projection {
    fn new(height: usize, width: usize, k: usize, seed: u64) -> Self {
        let fh = MOCK_MAX_FREQ.min(height / 2);
        let fw = MOCK_MAX_FREQ.min(width / 2);
        let tw_w = (0..=fw)
            .flat_map(|f| (0..width).map(move |x| (2.0 * PI * (f * x) as f64 / width as f64).sin_cos()))
            .map(|(s, c)| (c, s))
            .collect();
        let tw_h = (0..2 * fh + 1)
            .flat_map(|i| {
                let f = i as f64 - fh as f64;
                (0..height).map(move |y| (2.0 * PI * f * y as f64 / height as f64).sin_cos())
            })
            .map(|(s, c)| (c, s))
            .collect();
        // Real and imaginary part per (channel, fh, fw), minus the DC pair of each channel.
        let coeffs = (3 * 2 * (2 * fh + 1) * (fw + 1) - 6).max(1);
        let mut rng = seed::rng(seed::derive(seed, ((height as u64) << 32) | width as u64));
        let std = 1.0 / (coeffs as f64).sqrt();
        let weights = (0..k * coeffs)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Projection {
            height,
            width,
            fh,
            fw,
            tw_w,
            tw_h,
            weights,
            coeffs,
        }
    }

    /// Unitary low-pass DFT coefficients, DC removed.
    fn spectrum(&self, pixels: &[u8]) -> Vec<f64> {
        let (h, w, nf) = (self.height, self.width, self.fw + 1);
        let norm = 1.0 / (255.0 * ((h * w) as f64).sqrt());
        let mut out = Vec::with_capacity(self.coeffs);
        let mut rows = vec![(0.0, 0.0); h * nf];
        for c in 0..3 {
            for y in 0..h {
                let line = &pixels[3 * y * w..3 * (y + 1) * w];
                for f in 0..nf {
                    let tw = &self.tw_w[f * w..(f + 1) * w];
                    let (mut re, mut im) = (0.0, 0.0);
                    for (x, &(cs, sn)) in tw.iter().enumerate() {
                        let v = line[3 * x + c] as f64;
                        re += v * cs;
                        im -= v * sn;
                    }
                    rows[y * nf + f] = (re, im);
                }
            }
            for i in 0..2 * self.fh + 1 {
                let tw = &self.tw_h[i * h..(i + 1) * h];
                for f in 0..nf {
                    if i == self.fh && f == 0 {
                        continue;
                    }
                    let (mut re, mut im) = (0.0, 0.0);
                    for (y, &(cs, sn)) in tw.iter().enumerate() {
                        let (a, b) = rows[y * nf + f];
                        // (a + jb)·(cs − j·sn)
                        re += a * cs + b * sn;
                        im += b * cs - a * sn;
                    }
                    out.push(re * norm);
                    out.push(im * norm);
                }
            }
        }
        out.resize(self.coeffs, 0.0);
        out
    }

    fn apply(&self, pixels: &[u8]) -> Vec<f64> {
        let s = self.spectrum(pixels);
        self.weights
            .chunks_exact(self.coeffs)
            .map(|row| row.iter().zip(&s).map(|(g, v)| g * v).sum::<f64>().tanh())
            .collect()
    }
}

/// Projections keyed by image `(height, width)`.
type ProjectionCache = Arc<Mutex<HashMap<(usize, usize), Arc<Projection>>>>;

/// Mock extractor with the projection for each image size cached.
#[derive(Debug, Clone)]
pub struct MockExtractor {
    k: usize,
    seed: u64,
    cache: ProjectionCache,
}

impl MockExtractor {
    pub fn new(k: usize, seed: u64) -> Self {
        assert!(k >= 1, "feature dimension must be positive");
        MockExtractor {
            k,
            seed,
            cache: Arc::default(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn source_id(&self) -> String {
        format!("mock:k{}:seed{}", self.k, self.seed)
    }

    fn projection(&self, height: usize, width: usize) -> Arc<Projection> {
        let mut cache = self.cache.lock().expect("projection cache poisoned");
        cache
            .entry((height, width))
            .or_insert_with(|| Arc::new(Projection::new(height, width, self.k, self.seed)))
            .clone()
    }

    pub fn features(&self, image: &CsiImage) -> Vec<f64> {
        assert_eq!(image.pixels.len(), 3 * image.height * image.width, "pixel buffer size");
        self.projection(image.height, image.width).apply(&image.pixels)
    }

    pub fn extract(&self, image: &CsiImage, sample_id: impl Into<String>) -> FeatureVector {
        FeatureVector {
            values: self.features(image),
            source_id: self.source_id(),
            sample_id: sample_id.into(),
        }
    }
}

/// One-shot extraction; prefer [`MockExtractor`] for many images.
pub fn mock_extract(image: &CsiImage, k: usize, seed: u64) -> FeatureVector {
    MockExtractor::new(k, seed).extract(image, "")
}
