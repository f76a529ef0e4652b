use std::fmt::Write as _;

use rand::seq::SliceRandom;

use super::config::{ExperimentConfig, LocMethod};
use crate::channel::add_pilot_noise;
use crate::heads::{
    adam_train, loc_head_forward, param_count, ConvFeatExt, ConvSample, HeadDescriptor, LocHead, LocSample, Loss,
    Parameters, TrainConfig,
};
use crate::imaging::{encode_two_channel_zero, to_angular_delay};
use crate::io::{gen_loc_dataset, LocScenario, LocUser, MockExtractor};
use crate::{par, seed, Error, Result};

const DATA_STREAM: u64 = 0x10C_DA7A;
const SPLIT_STREAM: u64 = 0x10C_5B17;
const NOISE_STREAM: u64 = 0x10C_0015E;
const INIT_STREAM: u64 = 0x10C_1417;

#[derive(Debug, Clone)]
pub struct LocResult {
    pub snr_db: f64,
    pub method: LocMethod,
    pub param_count: usize,
    pub loss_trace: Vec<f64>,
    /// Mean test error in meters after every epoch.
    pub error_trace: Vec<f64>,
    pub mean_error_m: f64,
}

#[derive(Debug, Clone)]
pub struct LocOutcome {
    pub results: Vec<LocResult>,
    /// Trained mock-feature heads, one per SNR.
    pub heads: Vec<(f64, LocHead)>,
    pub csv: String,
}

impl LocOutcome {
    pub fn result(&self, snr_db: f64, method: LocMethod) -> Option<&LocResult> {
        self.results.iter().find(|r| r.snr_db == snr_db && r.method == method)
    }
}

/// Inputs derived from one noisy observation.
struct Prepared {
    mock: Vec<f64>,
    /// Channel-major `2 × m × n` real/imaginary parts, jointly min-max scaled.
    raw: Vec<f64>,
    log_power: f64,
    target: [f64; 2],
    xy: [f64; 2],
}

fn prepare(
    cfg: &ExperimentConfig,
    scenario: &LocScenario,
    extractor: &MockExtractor,
    user: &LocUser,
    snr_db: f64,
    noise_seed: u64,
) -> Result<Prepared> {
    let y = add_pilot_noise(&user.channel, snr_db, cfg.pilot_power, noise_seed)?;
    let map = to_angular_delay(&y, cfg.beta, cfg.gamma)?;
    let (image, power) = encode_two_channel_zero(&map, cfg.image_size, cfg.image_size)?;
    let mock = if cfg.loc_methods.contains(&LocMethod::Mock) {
        extractor.features(&image)
    } else {
        Vec::new()
    };
    let raw = if cfg.loc_methods.iter().any(|m| *m != LocMethod::Mock) {
        let e = &y.entries;
        let (lo, hi) = e
            .iter()
            .flat_map(|z| [z.re, z.im])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        // Column-major storage makes each plane a row-major subcarrier × antenna image.
        let mut raw = Vec::with_capacity(2 * e.len());
        raw.extend(e.iter().map(|z| (z.re - lo) / span));
        raw.extend(e.iter().map(|z| (z.im - lo) / span));
        raw
    } else {
        Vec::new()
    };
    Ok(Prepared {
        mock,
        raw,
        log_power: 10.0 * power.max(f64::MIN_POSITIVE).log10(),
        target: scenario.normalize_xy(user.position),
        xy: [user.position[0], user.position[1]],
    })
}

/// Per-dimension z-scoring with statistics from the training rows.
struct Standardizer {
    mean: Vec<f64>,
    inv_std: Vec<f64>,
}

impl Standardizer {
    fn fit<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Self {
        let mut n = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        for r in rows {
            if sum.is_empty() {
                sum = vec![0.0; r.len()];
                sq = vec![0.0; r.len()];
            }
            for ((s, q), v) in sum.iter_mut().zip(sq.iter_mut()).zip(r) {
                *s += v;
                *q += v * v;
            }
            n += 1;
        }
        let n = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let inv_std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = q / n - m * m;
                if var > 1e-18 {
                    1.0 / var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, inv_std }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.inv_std)
            .map(|((v, m), s)| (v - m) * s)
            .collect()
    }
}

fn mean_error(scenario: &LocScenario, preds: impl Iterator<Item = Result<[f64; 2]>>, truth: &[[f64; 2]]) -> Result<f64> {
    let mut total = 0.0;
    for (p, t) in preds.zip(truth) {
        let q = scenario.denormalize_xy(p?);
        total += (q[0] - t[0]).hypot(q[1] - t[1]);
    }
    Ok(total / truth.len() as f64)
}

/// Trains the localisation head on mock features plus the configured
/// baselines, at every SNR, and reports mean test error in meters.
pub fn run_loc(cfg: &ExperimentConfig) -> Result<LocOutcome> {
    cfg.validate()?;
    if cfg.features.is_some() {
        return Err(Error::Config(
            "external localisation features are not supported; omit features/manifest".into(),
        ));
    }
    let mode = cfg.parallelism();
    let scenario = LocScenario {
        num_samples: cfg.loc_samples,
        antennas: cfg.m,
        subcarriers: cfg.n,
        ..LocScenario::default()
    };
    let users = gen_loc_dataset(&scenario, cfg.loc_paths, seed::derive(cfg.master_seed, DATA_STREAM))?;
    let mut order: Vec<usize> = (0..users.len()).collect();
    order.shuffle(&mut seed::rng(seed::derive(cfg.master_seed, SPLIT_STREAM)));
    let n_test = ((users.len() as f64 * cfg.test_fraction).round() as usize).clamp(1, users.len() - 1);
    let (test_idx, train_idx) = order.split_at(n_test);
    let extractor = MockExtractor::new(cfg.k, cfg.master_seed);
    let conv_shape = (2, cfg.n, cfg.m);

    let mut results = Vec::new();
    let mut heads = Vec::new();
    let mut csv = cfg.comment_header();
    for method in &cfg.loc_methods {
        let count = match method {
            LocMethod::Mock => param_count(HeadDescriptor::Localization { k: cfg.k }),
            LocMethod::NoFeatExt => param_count(HeadDescriptor::NoFeatExt {
                h: cfg.m,
                w: cfg.n,
                channels: 2,
            }),
            LocMethod::ConvFeatExt => param_count(HeadDescriptor::ConvFeatExt {
                in_channels: 2,
                filters: cfg.conv_filters,
            }),
        };
        writeln!(csv, "# param_count_{}={count}", method.name()).expect("string write");
    }
    csv.push_str("snr_db,method,epoch,train_loss,mean_error_m\n");

    for (si, &snr) in cfg.snr_db_list.iter().enumerate() {
        let noise_base = seed::derive(seed::derive(cfg.master_seed, NOISE_STREAM), si as u64);
        let prepared = par::map_range(mode, users.len(), |i| {
            prepare(cfg, &scenario, &extractor, &users[i], snr, seed::derive(noise_base, i as u64))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let power_scale = Standardizer::fit(train_idx.iter().map(|&i| std::slice::from_ref(&prepared[i].log_power)));
        let power = |i: usize| power_scale.apply(&[prepared[i].log_power])[0];
        let truth: Vec<[f64; 2]> = test_idx.iter().map(|&i| prepared[i].xy).collect();

        for &method in &cfg.loc_methods {
            let tc = TrainConfig {
                epochs: cfg.epochs,
                batch_size: cfg.batch_size,
                learning_rate: cfg.learning_rate,
                seed: seed::derive(noise_base, 100 + method as u64),
                parallelism: mode,
                ..TrainConfig::default()
            };
            let init_seed = seed::derive(seed::derive(cfg.master_seed, INIT_STREAM), method as u64);
            let mut error_trace = Vec::with_capacity(cfg.epochs);
            let (loss_trace, param_count) = match method {
                LocMethod::Mock | LocMethod::NoFeatExt => {
                    let feats = |i: usize| -> &Vec<f64> {
                        if method == LocMethod::Mock {
                            &prepared[i].mock
                        } else {
                            &prepared[i].raw
                        }
                    };
                    let scale = Standardizer::fit(train_idx.iter().map(|&i| feats(i).as_slice()));
                    let sample = |i: usize| LocSample {
                        features: scale.apply(feats(i)),
                        power: power(i),
                        target: prepared[i].target,
                    };
                    let train: Vec<LocSample> = train_idx.iter().map(|&i| sample(i)).collect();
                    let test: Vec<LocSample> = test_idx.iter().map(|&i| sample(i)).collect();
                    let head = LocHead::init(feats(0).len(), init_seed);
                    let trained = adam_train(head, &train, Loss::MeanSquaredError, &tc, |_, h| {
                        let preds = test.iter().map(|s| loc_head_forward(h, &s.features, s.power));
                        error_trace.push(mean_error(&scenario, preds, &truth).unwrap_or(f64::NAN));
                    })?;
                    let count = trained.params.num_params();
                    if method == LocMethod::Mock {
                        heads.push((snr, trained.params));
                    }
                    (trained.loss_trace, count)
                }
                LocMethod::ConvFeatExt => {
                    let sample = |i: usize| ConvSample {
                        image: prepared[i].raw.clone(),
                        power: power(i),
                        target: prepared[i].target,
                    };
                    let train: Vec<ConvSample> = train_idx.iter().map(|&i| sample(i)).collect();
                    let test: Vec<ConvSample> = test_idx.iter().map(|&i| sample(i)).collect();
                    let model = ConvFeatExt::init(conv_shape, cfg.conv_filters, init_seed);
                    let trained = adam_train(model, &train, Loss::MeanSquaredError, &tc, |_, h| {
                        let preds = par::map(mode, &test, |s| h.forward(&s.image, s.power));
                        error_trace.push(mean_error(&scenario, preds.into_iter(), &truth).unwrap_or(f64::NAN));
                    })?;
                    let count = trained.params.num_params();
                    (trained.loss_trace, count)
                }
            };
            for (e, (l, err)) in loss_trace.iter().zip(&error_trace).enumerate() {
                writeln!(csv, "{},{},{},{:.6},{:.6}", snr, method.name(), e + 1, l, err).expect("string write");
            }
            results.push(LocResult {
                snr_db: snr,
                method,
                param_count,
                mean_error_m: error_trace.last().copied().unwrap_or(f64::NAN),
                loss_trace,
                error_trace,
            });
        }
    }
    Ok(LocOutcome { results, heads, csv })
}
