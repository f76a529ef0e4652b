use rand::seq::SliceRandom;

use super::{Head, Loss, Parameters};
use crate::par::{self, Parallelism};
use crate::{seed, Error, Result};

/// Samples per gradient partial sum. Partials are added in chunk order, so the
/// result does not depend on how many workers computed them.
const GRAD_CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub parallelism: Parallelism,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 256,
            batch_size: 200,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            parallelism: Parallelism::Auto,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::domain("epochs and batch size must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::domain("learning rate must be positive"));
        }
        let open = |b: f64| b > 0.0 && b < 1.0;
        if !open(self.adam_beta1) || !open(self.adam_beta2) {
            return Err(Error::domain("Adam betas must lie in (0, 1)"));
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::domain("Adam epsilon must be positive"));
        }
        Ok(())
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new<P: Parameters>(params: &P, cfg: &TrainConfig) -> Self {
        let shapes: Vec<Vec<f64>> = params.slices().iter().map(|s| vec![0.0; s.len()]).collect();
        Adam {
            m: shapes.clone(),
            v: shapes,
            t: 0,
            lr: cfg.learning_rate,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
        }
    }

    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params
            .slices_mut()
            .into_iter()
            .zip(grads.slices())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

/// Summary handed to the per-epoch callback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    /// Per-sample mean training loss over the epoch.
    pub train_loss: f64,
}

#[derive(Debug, Clone)]
pub struct Trained<H> {
    pub params: H,
    /// Mean training loss of every epoch, in order.
    pub loss_trace: Vec<f64>,
}

fn grad_norm<P: Parameters>(g: &P) -> f64 {
    g.slices().iter().flat_map(|s| s.iter()).map(|v| v * v).sum::<f64>().sqrt()
}

/// Mini-batch Adam. Batches come from a fresh seeded shuffle every epoch; the
/// final short batch is kept. `on_epoch` sees the parameters after each epoch.
pub fn adam_train<H, F>(head: H, data: &[H::Sample], loss: Loss, cfg: &TrainConfig, mut on_epoch: F) -> Result<Trained<H>>
where
    H: Head,
    F: FnMut(&EpochReport, &H) + Send,
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::domain("training set is empty"));
    }
    par::install(cfg.parallelism, move |mode| {
        let mut params = head;
        let mut opt = Adam::new(&params, cfg);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut trace = Vec::with_capacity(cfg.epochs);
        let mut grad = params.zeros_like();
        for epoch in 0..cfg.epochs {
            let mut rng = seed::rng(seed::derive(cfg.seed, epoch as u64));
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
                let w = 1.0 / batch.len() as f64;
                let chunks: Vec<&[usize]> = batch.chunks(GRAD_CHUNK).collect();
                let partials = par::map(mode, &chunks, |chunk| {
                    let mut g = params.zeros_like();
                    let mut l = 0.0;
                    for &i in *chunk {
                        l += params.sample_loss(&data[i], loss, w, Some(&mut g))?;
                    }
                    Ok::<_, Error>((l, g))
                });
                grad.slices_mut().into_iter().for_each(|s| s.fill(0.0));
                let mut batch_loss = 0.0;
                for partial in partials {
                    let (l, g) = partial?;
                    batch_loss += l;
                    for (dst, src) in grad.slices_mut().into_iter().zip(g.slices()) {
                        dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
                    }
                }
                let gn = grad_norm(&grad);
                if !batch_loss.is_finite() || !gn.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: b,
                        grad_norm: gn,
                    });
                }
                total += batch_loss;
                opt.step(&mut params, &grad);
            }
            let report = EpochReport {
                epoch,
                train_loss: total / data.len() as f64,
            };
            trace.push(report.train_loss);
            on_epoch(&report, &params);
        }
        Ok(Trained {
            params,
            loss_trace: trace,
        })
    })
}
