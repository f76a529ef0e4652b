//! End-to-end runs of the `csiwb` binary.

use std::path::Path;
use std::process::{Command, Output};

use csi_core::detection::stub::StubServer;
use csi_core::detection::PeakDetectorConfig;

const SMALL_CE: &[&str] = &[
    "--set", "m=16", "--set", "n=16", "--set", "beta=2", "--set", "gamma=2", "--set", "trials=4", "--set",
    "path_counts=2", "--set", "snr_db_list=0,10", "--set", "covariance_samples=40",
];

fn csiwb(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csiwb"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn csiwb")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

// ============================================================================
// Exit codes
// ============================================================================

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "task = ce-sweep\ntrials = zero\n").unwrap();
    let o = csiwb(dir.path(), &["ce-sweep", "--config", "bad.cfg"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("line 2"));

    assert_eq!(code(&csiwb(dir.path(), &["ce-sweep", "--set", "nonsense=1"])), 2);
    assert_eq!(code(&csiwb(dir.path(), &["har-train", "--config", "missing.cfg"])), 2);
    assert_eq!(code(&csiwb(dir.path(), &["loc-train", "--detector", "builtin", "--endpoint", "http://x"])), 2);
    assert_eq!(code(&csiwb(dir.path(), &["no-such-command"])), 2);

    std::fs::write(dir.path().join("har.cfg"), "task = har\n").unwrap();
    assert_eq!(code(&csiwb(dir.path(), &["ce-sweep", "--config", "har.cfg"])), 2, "task mismatch");
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = csiwb(dir.path(), &["plot", "absent.csv"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    assert_eq!(code(&csiwb(dir.path(), &["plot", "empty.csv", "--kind", "ce"])), 3);
    std::fs::write(dir.path().join("junk.png"), b"not a png").unwrap();
    assert_eq!(code(&csiwb(dir.path(), &["detect", "junk.png"])), 3);
}

#[test]
fn unreachable_service_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["encode-image", "--out", "a.png"];
    args.extend_from_slice(SMALL_CE);
    assert_eq!(code(&csiwb(dir.path(), &args)), 0);
    let o = csiwb(dir.path(), &["detect", "a.png", "--endpoint", "http://127.0.0.1:9", "--set", "timeout_ms=500"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));

    let mut args = vec!["ce-sweep", "--endpoint", "http://127.0.0.1:9", "--set", "timeout_ms=500", "--out", "o"];
    args.extend_from_slice(SMALL_CE);
    assert_eq!(code(&csiwb(dir.path(), &args)), 4);
    assert!(dir.path().join("o/ce_sweep.csv").exists(), "results are still written");
}

// ============================================================================
// Subcommands
// ============================================================================

#[test]
fn ce_sweep_is_seed_reproducible_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    for (out, workers) in [("a", "1"), ("b", "3")] {
        let mut args = vec!["ce-sweep", "--seed", "9", "--out", out, "--set"];
        let w = format!("workers={workers}");
        args.push(&w);
        args.extend_from_slice(SMALL_CE);
        let o = csiwb(dir.path(), &args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let a = std::fs::read_to_string(dir.path().join("a/ce_sweep.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b/ce_sweep.csv")).unwrap();
    let strip = |s: &str| s.lines().filter(|l| !l.starts_with("# workers")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&a), strip(&b));
    assert!(a.contains("# master_seed=9"));

    let o = csiwb(dir.path(), &["plot", "a/ce_sweep.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let svg = std::fs::read_to_string(dir.path().join("a/ce_sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn detect_through_stub_service() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["encode-image", "--out", "a.png", "--set", "snr_db_list=30"];
    args.extend_from_slice(&SMALL_CE[..8]);
    assert_eq!(code(&csiwb(dir.path(), &args)), 0);
    let stub = StubServer::peak_detector(PeakDetectorConfig::for_oversampling(2, 2)).unwrap();
    let endpoint = stub.endpoint();
    let o = csiwb(dir.path(), &["detect", "a.png", "--endpoint", &endpoint, "--prompt", "spots"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("center_w,center_h,confidence,angle,delay"));
    assert!(text.lines().count() >= 2);
    assert_eq!(stub.request_count(), 1);
}

#[test]
fn extract_mock_feeds_har_training() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--set", "k=32", "--set", "image_size=32", "--set", "har_per_class=4", "--set", "har_t=20"];
    let mut args = vec!["extract-mock", "--out", "f.fvec"];
    args.extend_from_slice(&common);
    let o = csiwb(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("f.jsonl").exists());

    let mut args = vec!["har-train", "--out", "h", "--set", "features=f.fvec", "--set", "manifest=f.jsonl", "--set", "epochs=5"];
    args.extend_from_slice(&common);
    let o = csiwb(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("h/har.csv").exists() && dir.path().join("h/har_head.bin").exists());

    let o = csiwb(dir.path(), &["har-train", "--set", "k=64", "--set", "features=f.fvec", "--set", "manifest=f.jsonl"]);
    assert_eq!(code(&o), 2, "K mismatch is a config error: {}", stderr(&o));
}

#[test]
fn loc_train_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = csiwb(
        dir.path(),
        &[
            "loc-train", "--out", "l", "--set", "m=8", "--set", "n=8", "--set", "loc_samples=40", "--set", "image_size=16",
            "--set", "k=16", "--set", "epochs=2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("l/loc.csv")).unwrap();
    assert!(csv.contains("snr_db,method,epoch,train_loss,mean_error_m"));
    assert!(dir.path().join("l/loc_head_snr10.bin").exists());
}
