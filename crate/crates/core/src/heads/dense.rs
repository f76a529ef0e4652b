use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dense, Head, Loss, Parameters};
use crate::{Error, Result};

/// Probability floor applied before taking logs in the cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

/// Single dense layer followed by softmax over `C` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHead {
    pub layer: Dense,
}

/// One labelled feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSample {
    pub features: Vec<f64>,
    pub label: usize,
}

impl DenseHead {
    pub fn zeros(k: usize, classes: usize) -> Self {
        DenseHead {
            layer: Dense::zeros(k, classes),
        }
    }

    pub fn init(k: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseHead {
            layer: Dense::glorot(k, classes, &mut rng),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.layer.in_dim
    }

    pub fn classes(&self) -> usize {
        self.layer.out_dim
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let p = dense_softmax_forward(self, x)?;
        Ok(argmax(&p))
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// `softmax(Wᵀx + b)`.
pub fn dense_softmax_forward(head: &DenseHead, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != head.layer.in_dim {
        return Err(Error::domain(format!(
            "feature length {} does not match head input {}",
            x.len(),
            head.layer.in_dim
        )));
    }
    let mut z = vec![0.0; head.layer.out_dim];
    head.layer.forward(x, &mut z);
    softmax_in_place(&mut z);
    Ok(z)
}

/// Mean negative log-likelihood of the true labels; probabilities are floored
/// at [`PROB_FLOOR`].
pub fn cross_entropy_loss(probs: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::domain("batch sizes of probabilities and labels differ"));
    }
    if probs.is_empty() {
        return Err(Error::domain("empty batch"));
    }
    let mut total = 0.0;
    for (p, &y) in probs.iter().zip(labels) {
        let py = *p
            .get(y)
            .ok_or_else(|| Error::domain(format!("label {y} out of range for {} classes", p.len())))?;
        total -= py.max(PROB_FLOOR).ln();
    }
    Ok(total / probs.len() as f64)
}

impl Parameters for DenseHead {
    fn slices(&self) -> Vec<&[f64]> {
        vec![&self.layer.weights, &self.layer.bias]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.layer.weights, &mut self.layer.bias]
    }

    fn zeros_like(&self) -> Self {
        DenseHead::zeros(self.layer.in_dim, self.layer.out_dim)
    }
}

impl Head for DenseHead {
    type Sample = ClassSample;

    fn sample_loss(&self, s: &ClassSample, loss: Loss, weight: f64, grad: Option<&mut Self>) -> Result<f64> {
        if loss != Loss::CrossEntropy {
            return Err(Error::domain("the dense-softmax head is trained with cross-entropy"));
        }
        if s.label >= self.classes() {
            return Err(Error::domain(format!("label {} out of range", s.label)));
        }
        let p = dense_softmax_forward(self, &s.features)?;
        let value = -p[s.label].max(PROB_FLOOR).ln();
        if let Some(g) = grad {
            let mut dz: Vec<f64> = p.iter().map(|v| v * weight).collect();
            dz[s.label] -= weight;
            self.layer.backward(&s.features, &dz, &mut g.layer, None);
        }
        Ok(value)
    }
}
