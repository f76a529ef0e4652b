use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dense, Head, Loss, Parameters};
use crate::{Error, Result};

/// Width of the dense expansion applied to the scalar channel power.
pub const POWER_EXPAND: usize = 8;

/// Localisation MLP: power `1 → 8` expansion, concatenation with the
/// `K`-dim feature, then dense 32 (ReLU), 16 (ReLU) and 2 (sigmoid).
#[derive(Debug, Clone, PartialEq)]
pub struct LocHead {
    pub power_expand: Dense,
    pub hidden1: Dense,
    pub hidden2: Dense,
    pub out: Dense,
}

/// Feature vector, scalar power input and a target in `(0, 1)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocSample {
    pub features: Vec<f64>,
    pub power: f64,
    pub target: [f64; 2],
}

struct Trace {
    concat: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    out: [f64; 2],
}

fn input_grad(layer: &Dense, dout: &[f64], dx: &mut [f64]) {
    for (dxi, row) in dx.iter_mut().zip(layer.weights.chunks_exact(layer.out_dim)) {
        *dxi = row.iter().zip(dout).map(|(w, d)| w * d).sum();
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl LocHead {
    pub fn zeros(k: usize) -> Self {
        LocHead {
            power_expand: Dense::zeros(1, POWER_EXPAND),
            hidden1: Dense::zeros(k + POWER_EXPAND, 32),
            hidden2: Dense::zeros(32, 16),
            out: Dense::zeros(16, 2),
        }
    }

    pub fn init(k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LocHead {
            power_expand: Dense::glorot(1, POWER_EXPAND, &mut rng),
            hidden1: Dense::glorot(k + POWER_EXPAND, 32, &mut rng),
            hidden2: Dense::glorot(32, 16, &mut rng),
            out: Dense::glorot(16, 2, &mut rng),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.hidden1.in_dim - POWER_EXPAND
    }

    fn trace(&self, x: &[f64], power: f64) -> Result<Trace> {
        let k = self.feature_dim();
        if x.len() != k {
            return Err(Error::domain(format!("feature length {} does not match head input {k}", x.len())));
        }
        let mut concat = Vec::with_capacity(k + POWER_EXPAND);
        concat.extend_from_slice(x);
        let mut e = [0.0; POWER_EXPAND];
        self.power_expand.forward(&[power], &mut e);
        concat.extend_from_slice(&e);
        let mut a1 = vec![0.0; 32];
        self.hidden1.forward(&concat, &mut a1);
        a1.iter_mut().for_each(|v| *v = v.max(0.0));
        let mut a2 = vec![0.0; 16];
        self.hidden2.forward(&a1, &mut a2);
        a2.iter_mut().for_each(|v| *v = v.max(0.0));
        let mut z = [0.0; 2];
        self.out.forward(&a2, &mut z);
        Ok(Trace {
            concat,
            a1,
            a2,
            out: [sigmoid(z[0]), sigmoid(z[1])],
        })
    }

    /// Pre-activation values of the two ReLU layers, for locating kinks.
    pub fn relu_preactivations(&self, x: &[f64], power: f64) -> Result<Vec<f64>> {
        let t = self.trace(x, power)?;
        let mut z1 = vec![0.0; 32];
        self.hidden1.forward(&t.concat, &mut z1);
        let mut z2 = vec![0.0; 16];
        self.hidden2.forward(&t.a1, &mut z2);
        z1.extend(z2);
        Ok(z1)
    }

    /// MSE loss (mean over both coordinates) with optional parameter and
    /// feature gradients, each scaled by `weight`.
    pub(crate) fn mse_backward(
        &self,
        x: &[f64],
        power: f64,
        target: [f64; 2],
        weight: f64,
        grad: Option<&mut LocHead>,
        dx: Option<&mut [f64]>,
    ) -> Result<f64> {
        let t = self.trace(x, power)?;
        let diff = [t.out[0] - target[0], t.out[1] - target[1]];
        let value = 0.5 * (diff[0] * diff[0] + diff[1] * diff[1]);
        if grad.is_none() && dx.is_none() {
            return Ok(value);
        }
        let dz3: Vec<f64> = (0..2).map(|i| weight * diff[i] * t.out[i] * (1.0 - t.out[i])).collect();
        let mut da2 = vec![0.0; 16];
        input_grad(&self.out, &dz3, &mut da2);
        let dz2: Vec<f64> = da2.iter().zip(&t.a2).map(|(d, a)| if *a > 0.0 { *d } else { 0.0 }).collect();
        let mut da1 = vec![0.0; 32];
        input_grad(&self.hidden2, &dz2, &mut da1);
        let dz1: Vec<f64> = da1.iter().zip(&t.a1).map(|(d, a)| if *a > 0.0 { *d } else { 0.0 }).collect();
        let mut dconcat = vec![0.0; t.concat.len()];
        let k = self.feature_dim();
        // Feature-input gradients are only needed when the caller asks for them.
        let from = if dx.is_some() { 0 } else { k };
        let rows = &self.hidden1.weights[from * self.hidden1.out_dim..];
        for (d, row) in dconcat[from..].iter_mut().zip(rows.chunks_exact(self.hidden1.out_dim)) {
            *d = row.iter().zip(&dz1).map(|(w, g)| w * g).sum();
        }
        if let Some(g) = grad {
            self.out.backward(&t.a2, &dz3, &mut g.out, None);
            self.hidden2.backward(&t.a1, &dz2, &mut g.hidden2, None);
            self.hidden1.backward(&t.concat, &dz1, &mut g.hidden1, None);
            self.power_expand
                .backward(&[power], &dconcat[k..], &mut g.power_expand, None);
        }
        if let Some(dx) = dx {
            dx.copy_from_slice(&dconcat[..k]);
        }
        Ok(value)
    }
}

/// Predicted position in `(0, 1)²`.
pub fn loc_head_forward(head: &LocHead, x: &[f64], power: f64) -> Result<[f64; 2]> {
    Ok(head.trace(x, power)?.out)
}

impl Parameters for LocHead {
    fn slices(&self) -> Vec<&[f64]> {
        [&self.power_expand, &self.hidden1, &self.hidden2, &self.out]
            .into_iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        [&mut self.power_expand, &mut self.hidden1, &mut self.hidden2, &mut self.out]
            .into_iter()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    fn zeros_like(&self) -> Self {
        LocHead::zeros(self.feature_dim())
    }
}

impl Head for LocHead {
    type Sample = LocSample;

    fn sample_loss(&self, s: &LocSample, loss: Loss, weight: f64, grad: Option<&mut Self>) -> Result<f64> {
        if loss != Loss::MeanSquaredError {
            return Err(Error::domain("the localisation head is trained with mean squared error"));
        }
        self.mse_backward(&s.features, s.power, s.target, weight, grad, None)
    }
}
