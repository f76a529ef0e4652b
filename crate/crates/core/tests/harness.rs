//! Experiment runners end to end on small configurations.

use csi_core::detection::stub::StubServer;
use csi_core::detection::PeakDetectorConfig;
use csi_core::harness::{
    emit_plot, run_ce_sweep, run_har, run_loc, DetectorChoice, ExperimentConfig, LocMethod, Method, PlotKind, Task,
};
use csi_core::io::{write_features, write_manifest, FeatureSet, Manifest, ManifestEntry, ManifestHeader, TaskKind};
use csi_core::Error;

fn small_ce() -> ExperimentConfig {
    ExperimentConfig::parse(
        "task = ce-sweep\nm = 16\nn = 16\nbeta = 2\ngamma = 2\npath_counts = 2,4\nsnr_db_list = 0,10\ntrials = 6\ncovariance_samples = 60\nseed = 21\n",
        None,
    )
    .unwrap()
}

// ============================================================================
// Config files
// ============================================================================

#[test]
fn config_errors_carry_line_numbers() {
    let err = ExperimentConfig::parse("task = ce-sweep\n\nbogus = 1\n", None).unwrap_err();
    assert!(matches!(err, Error::Config(ref m) if m.contains("line 3")), "got {err:?}");
    let err = ExperimentConfig::parse("trials = 2\ntrials = 3\n", Some(Task::CeSweep)).unwrap_err();
    assert!(matches!(err, Error::Config(ref m) if m.contains("duplicate")), "got {err:?}");
    assert!(ExperimentConfig::parse("trials = 0\n", Some(Task::CeSweep)).is_err());
    assert!(ExperimentConfig::parse("m = 4\n", None).is_err(), "task must be known");
}

#[test]
fn endpoint_selects_external_detector() {
    let cfg = ExperimentConfig::parse("endpoint = http://x:1\nprompt = dots\n", Some(Task::CeSweep)).unwrap();
    assert_eq!(
        cfg.detector,
        DetectorChoice::External {
            endpoint: "http://x:1".into(),
            prompt: "dots".into()
        }
    );
}

// ============================================================================
// Channel-estimation sweep
// ============================================================================

#[test]
fn ce_csv_is_identical_across_worker_counts() {
    let mut base = small_ce();
    let mut csvs = Vec::new();
    for workers in [1, 0, 3] {
        base.workers = workers;
        csvs.push(run_ce_sweep(&base).unwrap().csv);
    }
    assert!(csvs[0] == csvs[1] && csvs[1] == csvs[2], "CSV bytes depend on the worker count");
}

#[test]
fn ce_csv_embeds_config_and_covers_the_grid() {
    let sweep = run_ce_sweep(&small_ce()).unwrap();
    assert_eq!(sweep.rows.len(), 2 * 2 * 3);
    assert!(sweep.csv.contains("# master_seed=21"));
    assert!(sweep.csv.contains("snr_db,path_count,method,mean_nmse_db,trials,fallbacks"));
    for row in &sweep.rows {
        assert!(row.mean_nmse_db.is_finite());
        assert_eq!(row.trials, 6);
    }
    let ls = sweep.row(10.0, 4, Method::Ls).unwrap().mean_nmse_db;
    assert!((ls + 10.0).abs() < 1.5, "LS at 10 dB gave {ls}");
}

#[test]
fn ce_sweep_through_stub_service() {
    let stub = StubServer::peak_detector(PeakDetectorConfig::for_oversampling(2, 2)).unwrap();
    let mut cfg = small_ce();
    cfg.set("endpoint", &stub.endpoint()).unwrap();
    cfg.snr_db_list = vec![10.0];
    cfg.path_counts = vec![2];
    let sweep = run_ce_sweep(&cfg).unwrap();
    let row = sweep.row(10.0, 2, Method::Pipeline).unwrap();
    assert_eq!(row.fallbacks, 0, "every trial should be served by the stub");
    assert_eq!(stub.request_count(), cfg.trials);
    assert!(row.mean_nmse_db < sweep.row(10.0, 2, Method::Ls).unwrap().mean_nmse_db);
}

#[test]
fn ce_sweep_falls_back_when_service_is_down() {
    let mut cfg = small_ce();
    cfg.set("endpoint", "http://127.0.0.1:9").unwrap();
    cfg.timeout_ms = 500;
    cfg.snr_db_list = vec![5.0];
    cfg.path_counts = vec![2];
    let sweep = run_ce_sweep(&cfg).unwrap();
    assert_eq!(sweep.row(5.0, 2, Method::Pipeline).unwrap().fallbacks, cfg.trials);
}

// ============================================================================
// HAR
// ============================================================================

fn separable_har_files(dir: &std::path::Path, k: usize, per_class: usize) -> (std::path::PathBuf, std::path::PathBuf) {
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for i in 0..7 * per_class {
        let label = i % 7;
        let mut row = vec![0.0f32; k];
        row[label] = 1.0;
        row[(label + 3) % k] = 0.05 * (i / 7) as f32;
        rows.push(row);
        entries.push(ManifestEntry {
            id: format!("s{i}"),
            feature_row: i,
            label: Some(label),
            position: None,
            power: None,
        });
    }
    let fpath = dir.join("har.fvec");
    let mpath = dir.join("har.jsonl");
    write_features(&fpath, &FeatureSet::new("test", k, rows).unwrap()).unwrap();
    let header = ManifestHeader {
        task: TaskKind::Har,
        k,
        classes: Some(7),
        features: Some("har.fvec".into()),
    };
    write_manifest(&mpath, &Manifest { header, entries }).unwrap();
    (fpath, mpath)
}

#[test]
fn har_from_feature_file_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (f, m) = separable_har_files(dir.path(), 8, 10);
    let mut cfg = ExperimentConfig::defaults(Task::Har);
    cfg.k = 8;
    cfg.epochs = 60;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.05;
    cfg.features = Some(f);
    cfg.manifest = Some(m);
    let out = run_har(&cfg).unwrap();
    assert_eq!(out.param_count, 8 * 7 + 7);
    assert!(out.train_accuracy >= 0.99, "train accuracy {}", out.train_accuracy);
    assert!(out.csv.contains("# param_count=63"));
    assert_eq!(out.csv, run_har(&cfg).unwrap().csv, "HAR CSV must be reproducible");
}

#[test]
fn har_dimension_mismatch_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (f, m) = separable_har_files(dir.path(), 8, 2);
    let mut cfg = ExperimentConfig::defaults(Task::Har);
    cfg.k = 16;
    cfg.features = Some(f);
    cfg.manifest = Some(m);
    assert!(matches!(run_har(&cfg), Err(Error::Config(_))));
}

#[test]
fn har_on_small_synthetic_data() {
    let mut cfg = ExperimentConfig::defaults(Task::Har);
    cfg.har_per_class = 6;
    cfg.har_t = 20;
    cfg.image_size = 32;
    cfg.k = 64;
    cfg.epochs = 20;
    let a = run_har(&cfg).unwrap();
    cfg.workers = 1;
    let b = run_har(&cfg).unwrap();
    assert_eq!(a.csv, b.csv);
    assert_eq!(a.accuracy_trace.len(), 20);
}

// ============================================================================
// Localisation
// ============================================================================

fn small_loc() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(Task::Loc);
    cfg.m = 8;
    cfg.n = 8;
    cfg.beta = 1;
    cfg.gamma = 1;
    cfg.loc_samples = 60;
    cfg.loc_paths = 3;
    cfg.image_size = 16;
    cfg.k = 16;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.snr_db_list = vec![10.0];
    cfg.conv_filters = [2, 3, 4];
    cfg.loc_methods = vec![LocMethod::Mock, LocMethod::NoFeatExt, LocMethod::ConvFeatExt];
    cfg
}

#[test]
fn loc_runs_every_method_deterministically() {
    let cfg = small_loc();
    let a = run_loc(&cfg).unwrap();
    assert_eq!(a.results.len(), 3);
    for r in &a.results {
        assert_eq!(r.error_trace.len(), 3);
        assert!(r.mean_error_m.is_finite() && r.mean_error_m > 0.0);
    }
    assert_eq!(a.result(10.0, LocMethod::Mock).unwrap().param_count, 32 * 16 + 866);
    let mut seq = cfg.clone();
    seq.workers = 1;
    assert_eq!(a.csv, run_loc(&seq).unwrap().csv);
}

#[test]
fn loc_rejects_feature_files() {
    let mut cfg = small_loc();
    cfg.features = Some("f".into());
    cfg.manifest = Some("m".into());
    assert!(matches!(run_loc(&cfg), Err(Error::Config(_))));
}

// ============================================================================
// Plots
// ============================================================================

#[test]
fn plots_from_sweep_output() {
    let sweep = run_ce_sweep(&small_ce()).unwrap();
    let svg = emit_plot(&sweep.csv, PlotKind::Ce).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg, emit_plot(&sweep.csv, PlotKind::Ce).unwrap());
    assert!(matches!(emit_plot("", PlotKind::Ce), Err(Error::EmptyInput)));
    let loc = run_loc(&small_loc()).unwrap();
    assert!(emit_plot(&loc.csv, PlotKind::Loc).unwrap().contains("</svg>"));
}
