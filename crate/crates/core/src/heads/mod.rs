//! Trainable heads placed after a frozen feature extractor: a dense-softmax
//! classifier, a power-augmented localisation MLP, and the two localisation
//! baselines that skip the pretrained extractor.

mod adam;
mod conv;
mod dense;
mod gradcheck;
mod loc;
mod serialize;

pub use adam::{adam_train, Adam, EpochReport, TrainConfig, Trained};
pub use conv::{Conv2d, ConvFeatExt, ConvSample};
pub use dense::{cross_entropy_loss, dense_softmax_forward, ClassSample, DenseHead, PROB_FLOOR};
pub use gradcheck::{grad_check, GradCheckReport};
pub use loc::{loc_head_forward, LocHead, LocSample, POWER_EXPAND};
pub use serialize::{read_head, write_head, SavedHead};


use rand::Rng;

use crate::Result;

/// Fully connected layer `y = Wᵀx + b` with `W` stored `in × out` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Dense {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim).map(|_| rng.random_range(-limit..=limit)).collect();
        Dense {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn num_params(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        out.copy_from_slice(&self.bias);
        for (xi, row) in x.iter().zip(self.weights.chunks_exact(self.out_dim)) {
            if *xi == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }

    /// Accumulates parameter gradients for upstream gradient `dout` into
    /// `grad`, and writes the input gradient into `dx` when requested.
    pub fn backward(&self, x: &[f64], dout: &[f64], grad: &mut Dense, dx: Option<&mut [f64]>) {
        for (b, d) in grad.bias.iter_mut().zip(dout) {
            *b += d;
        }
        for (xi, row) in x.iter().zip(grad.weights.chunks_exact_mut(self.out_dim)) {
            if *xi == 0.0 {
                continue;
            }
            for (g, d) in row.iter_mut().zip(dout) {
                *g += xi * d;
            }
        }
        if let Some(dx) = dx {
            for (dxi, row) in dx.iter_mut().zip(self.weights.chunks_exact(self.out_dim)) {
                *dxi = row.iter().zip(dout).map(|(w, d)| w * d).sum();
            }
        }
    }
}

/// Flat view over a model's trainable tensors, in a fixed order.
pub trait Parameters {
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;
    /// Same shapes, every value zero.
    fn zeros_like(&self) -> Self;

    fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    fn param(&self, idx: usize) -> f64 {
        let mut i = idx;
        for s in self.slices() {
            if i < s.len() {
                return s[i];
            }
            i -= s.len();
        }
        panic!("parameter index {idx} out of range")
    }

    fn set_param(&mut self, idx: usize, v: f64) {
        let mut i = idx;
        for s in self.slices_mut() {
            if i < s.len() {
                s[i] = v;
                return;
            }
            i -= s.len();
        }
        panic!("parameter index {idx} out of range")
    }
}

/// Objective used by [`adam_train`] and [`grad_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    CrossEntropy,
    MeanSquaredError,
}

/// A trainable model with a per-sample differentiable loss.
pub trait Head: Parameters + Clone + Send + Sync {
    type Sample: Sync;

    /// Loss of one sample. When `grad` is given, `weight · ∂loss/∂θ` is added
    /// to it.
    fn sample_loss(&self, sample: &Self::Sample, loss: Loss, weight: f64, grad: Option<&mut Self>) -> Result<f64>;
}

/// Architecture descriptor for [`param_count`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadDescriptor {
    /// Single dense layer with softmax over `classes`.
    DenseSoftmax { k: usize, classes: usize },
    /// Power expansion plus the 32/16/2 MLP on a `k`-dim feature.
    Localization { k: usize },
    /// Localisation MLP fed with the raw flattened `h × w × channels` input.
    NoFeatExt { h: usize, w: usize, channels: usize },
    /// Three stride-2 3×3 convolutions, global average pooling, then the
    /// localisation MLP on the pooled features.
    ConvFeatExt { in_channels: usize, filters: [usize; 3] },
}

/// Exact number of trainable scalars.
pub fn param_count(desc: HeadDescriptor) -> usize {
    let dense = |i: usize, o: usize| i * o + o;
    let loc = |k: usize| dense(1, POWER_EXPAND) + dense(k + POWER_EXPAND, 32) + dense(32, 16) + dense(16, 2);
    match desc {
        HeadDescriptor::DenseSoftmax { k, classes } => dense(k, classes),
        HeadDescriptor::Localization { k } => loc(k),
        HeadDescriptor::NoFeatExt { h, w, channels } => loc(h * w * channels),
        HeadDescriptor::ConvFeatExt { in_channels, filters } => {
            let mut c = in_channels;
            let mut total = 0;
            for f in filters {
                total += 9 * c * f + f;
                c = f;
            }
            total + loc(c)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_head_counts() {
        let d = |k| param_count(HeadDescriptor::DenseSoftmax { k, classes: 7 });
        assert_eq!(d(2048), 14_343);
        assert_eq!(d(768), 5_383);
        assert_eq!(d(1000), 7_007);
    }

    #[test]
    fn localization_counts() {
        assert_eq!(param_count(HeadDescriptor::Localization { k: 1024 }), 33_634);
        for k in [1, 10, 2048] {
            assert_eq!(param_count(HeadDescriptor::Localization { k }), 32 * k + 866);
        }
        assert_eq!(param_count(HeadDescriptor::NoFeatExt { h: 56, w: 56, channels: 2 }), 201_570);
        assert_eq!(
            param_count(HeadDescriptor::ConvFeatExt { in_channels: 2, filters: [8, 32, 1024] }),
            332_058
        );
    }

    #[test]
    fn dense_backward_matches_manual() {
        let mut d = Dense::zeros(2, 3);
        d.weights = vec![1., 2., 3., 4., 5., 6.];
        d.bias = vec![0.5, 0.0, -0.5];
        let x = [1.0, -1.0];
        let mut y = [0.0; 3];
        d.forward(&x, &mut y);
        assert_eq!(y, [-2.5, -3.0, -3.5]);
        let mut g = Dense::zeros(2, 3);
        let mut dx = [0.0; 2];
        d.backward(&x, &[1.0, 0.0, 1.0], &mut g, Some(&mut dx));
        assert_eq!(g.bias, vec![1.0, 0.0, 1.0]);
        assert_eq!(g.weights, vec![1.0, 0.0, 1.0, -1.0, 0.0, -1.0]);
        assert_eq!(dx, [4.0, 10.0]);
    }
}

/// Length-`K` feature produced by a (frozen) extractor for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub source_id: String,
    pub sample_id: String,
}
