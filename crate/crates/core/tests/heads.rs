//! Head forward passes, gradients, training and serialisation.

use csi_core::heads::{
    adam_train, cross_entropy_loss, dense_softmax_forward, grad_check, loc_head_forward, read_head, write_head,
    ClassSample, ConvFeatExt, ConvSample, DenseHead, LocHead, LocSample, Loss, Parameters, SavedHead, TrainConfig,
};
use csi_core::par::Parallelism;
use csi_core::Error;
use proptest::prelude::*;

// ============================================================================
// Dense softmax head
// ============================================================================

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_sums_to_one(x in prop::collection::vec(-50.0..50.0f64, 6), seed in 0u64..1000) {
        let head = DenseHead::init(6, 7, seed);
        let p = dense_softmax_forward(&head, &x).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|v| *v >= 0.0));
    }

    /// Adding a constant to every logit (through the bias) keeps the argmax.
    #[test]
    fn argmax_is_shift_invariant(x in prop::collection::vec(-5.0..5.0f64, 4), shift in -100.0..100.0f64, seed in 0u64..1000) {
        let head = DenseHead::init(4, 7, seed);
        let mut shifted = head.clone();
        for b in &mut shifted.layer.bias {
            *b += shift;
        }
        prop_assert_eq!(head.predict(&x).unwrap(), shifted.predict(&x).unwrap());
    }
}

#[test]
fn dense_rejects_wrong_dimension() {
    let head = DenseHead::init(4, 7, 0);
    assert!(matches!(dense_softmax_forward(&head, &[1.0; 3]), Err(Error::Domain(_))));
}

#[test]
fn cross_entropy_of_uniform_prediction() {
    let p = vec![vec![0.25; 4]; 3];
    let l = cross_entropy_loss(&p, &[0, 1, 3]).unwrap();
    assert!((l - 4f64.ln()).abs() < 1e-12);
}

// ============================================================================
// Localisation heads
// ============================================================================

#[test]
fn loc_head_output_is_bounded() {
    let head = LocHead::init(10, 3);
    for s in 0..20 {
        let x: Vec<f64> = (0..10).map(|i| ((i * 7 + s) % 11) as f64 - 5.0).collect();
        let y = loc_head_forward(&head, &x, s as f64 * 0.1).unwrap();
        assert!(y.iter().all(|v| (0.0..=1.0).contains(v)), "output {y:?}");
    }
    assert_eq!(head.num_params(), 32 * 10 + 866);
}

#[test]
fn conv_baseline_gradients_match() {
    for seed in 0..5 {
        let head = ConvFeatExt::init((2, 9, 8), [3, 4, 5], seed);
        let sample = ConvSample {
            image: (0..144).map(|i| ((i * 13 + seed as usize) % 17) as f64 / 17.0).collect(),
            power: 0.3,
            target: [0.2, 0.7],
        };
        let r = grad_check(&head, Loss::MeanSquaredError, &sample, 1.0, 0).unwrap();
        assert!(r.max_rel_error < 1e-4, "seed {seed}: max relative error {}", r.max_rel_error);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn loc_gradients_match(seed in 0u64..10_000) {
        let head = LocHead::init(6, seed);
        let sample = LocSample {
            features: (0..6).map(|i| ((seed + i) % 5) as f64 * 0.3 - 0.6).collect(),
            power: 0.5,
            target: [0.4, 0.6],
        };
        let r = grad_check(&head, Loss::MeanSquaredError, &sample, 1.0, seed).unwrap();
        prop_assert!(r.max_rel_error < 1e-4, "max relative error {}", r.max_rel_error);
    }

    #[test]
    fn dense_gradients_match(seed in 0u64..10_000) {
        let head = DenseHead::init(5, 7, seed);
        let sample = ClassSample {
            features: (0..5).map(|i| ((seed * 3 + i) % 7) as f64 * 0.2 - 0.6).collect(),
            label: (seed % 7) as usize,
        };
        let r = grad_check(&head, Loss::CrossEntropy, &sample, 1.0, seed).unwrap();
        prop_assert!(r.max_rel_error < 1e-5, "max relative error {}", r.max_rel_error);
    }
}

// ============================================================================
// Training
// ============================================================================

fn clusters(per_class: usize) -> Vec<ClassSample> {
    (0..7 * per_class)
        .map(|i| {
            let label = i % 7;
            let mut features = vec![0.0; 7];
            features[label] = 1.0;
            features[(label + 1) % 7] = 0.1 * ((i / 7) % 3) as f64;
            ClassSample { features, label }
        })
        .collect()
}

#[test]
fn training_is_bit_identical_across_worker_counts() {
    let data = clusters(20);
    let run = |parallelism| {
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 50,
            learning_rate: 1e-2,
            seed: 4,
            parallelism,
            ..TrainConfig::default()
        };
        adam_train(DenseHead::init(7, 7, 1), &data, Loss::CrossEntropy, &cfg, |_, _| {}).unwrap()
    };
    let a = run(Parallelism::Sequential);
    for mode in [Parallelism::Auto, Parallelism::Threads(3)] {
        let b = run(mode);
        assert_eq!(a.params, b.params, "{mode:?} changed the trained weights");
        assert_eq!(a.loss_trace, b.loss_trace);
    }
}

#[test]
fn training_rejects_bad_config() {
    let cfg = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    let r = adam_train(DenseHead::init(7, 7, 1), &clusters(1), Loss::CrossEntropy, &cfg, |_, _| {});
    assert!(r.is_err());
}

#[test]
fn divergent_training_reports_non_finite_loss() {
    let mut data = clusters(2);
    data[0].features[0] = f64::NAN;
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 4,
        ..TrainConfig::default()
    };
    let r = adam_train(DenseHead::init(7, 7, 1), &data, Loss::CrossEntropy, &cfg, |_, _| {});
    assert!(matches!(r, Err(Error::NonFiniteLoss { .. })), "got {:?}", r.map(|_| ()));
}

// ============================================================================
// Serialisation
// ============================================================================

#[test]
fn saved_heads_round_trip() {
    for head in [SavedHead::Dense(DenseHead::init(9, 7, 2)), SavedHead::Localization(LocHead::init(5, 3))] {
        let mut buf = Vec::new();
        write_head(&head, &mut buf).unwrap();
        assert_eq!(read_head(buf.as_slice()).unwrap(), head);
        assert!(read_head(&buf[..buf.len() - 1]).is_err());
    }
}
