use std::fmt::Write as _;

use rand::seq::SliceRandom;

use super::config::ExperimentConfig;
use crate::heads::{adam_train, param_count, ClassSample, DenseHead, HeadDescriptor, Loss, TrainConfig};
use crate::imaging::grayscale_reshape_resize;
use crate::io::{read_features, read_manifest, synthetic_har, MockExtractor, TaskKind, HAR_CLASSES};
use crate::{par, seed, Error, Result};

const SPLIT_STREAM: u64 = 0x5_B117;
const TRAIN_STREAM: u64 = 0x7_EA1;
const DATA_STREAM: u64 = 0xDA7A;

#[derive(Debug, Clone)]
pub struct HarOutcome {
    pub head: DenseHead,
    pub param_count: usize,
    pub loss_trace: Vec<f64>,
    /// Test accuracy after every epoch.
    pub accuracy_trace: Vec<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub csv: String,
}

/// Seeded per-class split. Each class with at least two members contributes
/// `round(fraction · size)` samples, clamped to `[1, size − 1]`, to the test
/// set. Returns `(train, test)` index lists in ascending order.
pub fn stratified_split(labels: &[usize], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let classes = labels.iter().copied().max().map_or(0, |c| c + 1);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut seed::rng(seed::derive(seed, c as u64)));
        let take = if members.len() < 2 {
            0
        } else {
            ((members.len() as f64 * test_fraction).round() as usize).clamp(1, members.len() - 1)
        };
        test.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn accuracy(head: &DenseHead, data: &[ClassSample]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let hits = data
        .iter()
        .filter(|s| head.predict(&s.features).is_ok_and(|p| p == s.label))
        .count();
    hits as f64 / data.len() as f64
}

fn load_samples(cfg: &ExperimentConfig) -> Result<Vec<ClassSample>> {
    if let (Some(fpath), Some(mpath)) = (&cfg.features, &cfg.manifest) {
        let features = read_features(fpath)?;
        let manifest = read_manifest(mpath, features.count())?;
        if manifest.header.task != TaskKind::Har {
            return Err(Error::Config(format!("{} is not a HAR manifest", mpath.display())));
        }
        if features.dim != cfg.k || manifest.header.k != cfg.k {
            return Err(Error::Config(format!(
                "feature dimension mismatch: config k={}, file {}, manifest {}",
                cfg.k, features.dim, manifest.header.k
            )));
        }
        return Ok(manifest
            .entries
            .iter()
            .map(|e| ClassSample {
                features: features.row_f64(e.feature_row),
                label: e.label.expect("validated manifest"),
            })
            .collect());
    }
    let groups = synthetic_har(
        cfg.har_per_class,
        cfg.har_t,
        cfg.har_m,
        cfg.har_n,
        seed::derive(cfg.master_seed, DATA_STREAM),
    )?;
    let extractor = MockExtractor::new(cfg.k, cfg.master_seed);
    par::map(cfg.parallelism(), &groups, |(tensor, label)| {
        let image = grayscale_reshape_resize(tensor, cfg.image_size, cfg.image_size)?;
        Ok(ClassSample {
            features: extractor.features(&image),
            label: *label,
        })
    })
    .into_iter()
    .collect()
}

/// Trains the single-layer softmax head on HAR features.
///
/// Features come from the configured feature file and manifest, or else from
/// the mock extractor applied to synthetic activity groups.
pub fn run_har(cfg: &ExperimentConfig) -> Result<HarOutcome> {
    cfg.validate()?;
    let samples = load_samples(cfg)?;
    if samples.is_empty() {
        return Err(Error::Config("HAR dataset is empty".into()));
    }
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let (train_idx, test_idx) = stratified_split(&labels, cfg.test_fraction, seed::derive(cfg.master_seed, SPLIT_STREAM));
    let train: Vec<ClassSample> = train_idx.iter().map(|&i| samples[i].clone()).collect();
    let test: Vec<ClassSample> = test_idx.iter().map(|&i| samples[i].clone()).collect();
    let tc = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        seed: seed::derive(cfg.master_seed, TRAIN_STREAM),
        parallelism: cfg.parallelism(),
        ..TrainConfig::default()
    };
    let head = DenseHead::init(cfg.k, HAR_CLASSES, seed::derive(cfg.master_seed, TRAIN_STREAM + 1));
    let mut accuracy_trace = Vec::with_capacity(cfg.epochs);
    let trained = adam_train(head, &train, Loss::CrossEntropy, &tc, |_, h| {
        accuracy_trace.push(accuracy(h, &test));
    })?;
    let mut csv = cfg.comment_header();
    let param_count = param_count(HeadDescriptor::DenseSoftmax {
        k: cfg.k,
        classes: HAR_CLASSES,
    });
    writeln!(csv, "# param_count={param_count}").expect("string write");
    writeln!(csv, "# train_samples={} test_samples={}", train.len(), test.len()).expect("string write");
    csv.push_str("epoch,train_loss,test_accuracy\n");
    for (e, (loss, acc)) in trained.loss_trace.iter().zip(&accuracy_trace).enumerate() {
        writeln!(csv, "{},{:.6},{:.6}", e + 1, loss, acc).expect("string write");
    }
    Ok(HarOutcome {
        train_accuracy: accuracy(&trained.params, &train),
        test_accuracy: accuracy_trace.last().copied().unwrap_or(0.0),
        head: trained.params,
        param_count,
        loss_trace: trained.loss_trace,
        accuracy_trace,
        csv,
    })
}
