use std::fmt::Write as _;
use std::time::Duration;

use super::config::{DetectorChoice, ExperimentConfig};
use crate::channel::{add_pilot_noise, sample_paths, synth_channel, ChannelMatrix, PathGrid, PilotObservation};
use crate::detection::{detect_external_batch, detect_peaks_builtin, Detection, ExternalDetector, PeakDetectorConfig};
use crate::estimation::{estimate_covariance, estimate_from_detections, lmmse_estimate, ls_estimate, nmse, CovarianceModel};
use crate::imaging::{encode_rgb_colormap, modulus_normalize, to_angular_delay, CsiImage, NormalizedMap};
use crate::{par, seed, Result};

/// Seed stream reserved for the channels behind the LMMSE covariance, so they
/// never coincide with evaluation trials.
const COVARIANCE_STREAM: u64 = 0xC05A_11CE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Pipeline,
    Ls,
    Lmmse,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Pipeline, Method::Ls, Method::Lmmse];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pipeline => "pipeline",
            Method::Ls => "ls",
            Method::Lmmse => "lmmse",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeRow {
    pub snr_db: f64,
    pub path_count: usize,
    pub method: Method,
    pub mean_nmse_db: f64,
    pub trials: usize,
    /// Trials where the external detector failed and the built-in one was used.
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeSweep {
    pub rows: Vec<CeRow>,
    pub csv: String,
}

impl CeSweep {
    pub fn row(&self, snr_db: f64, path_count: usize, method: Method) -> Option<&CeRow> {
        self.rows
            .iter()
            .find(|r| r.snr_db == snr_db && r.path_count == path_count && r.method == method)
    }
}

struct Trial {
    truth: ChannelMatrix,
    y: PilotObservation,
    norm: NormalizedMap,
}

fn peak_config(cfg: &ExperimentConfig, l: usize) -> PeakDetectorConfig {
    let base = PeakDetectorConfig::for_oversampling(cfg.beta, cfg.gamma);
    if cfg.known_count {
        base.with_known_count(l)
    } else {
        base
    }
}

/// Covariance from `covariance_samples` noiseless channels with `l` paths.
pub fn covariance_for(cfg: &ExperimentConfig, l: usize) -> Result<CovarianceModel> {
    let grid = cfg.on_grid.then_some(PathGrid {
        beta: cfg.beta,
        gamma: cfg.gamma,
    });
    let base = seed::derive(cfg.master_seed, COVARIANCE_STREAM);
    let channels = par::map_range(cfg.parallelism(), cfg.covariance_samples.max(2), |i| {
        let paths = sample_paths(l, seed::derive(base, i as u64), grid, cfg.m, cfg.n)?;
        synth_channel(&paths, cfg.m, cfg.n)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    estimate_covariance(&channels)
}

fn make_trial(cfg: &ExperimentConfig, l: usize, snr_db: f64, t: usize) -> Result<Trial> {
    let grid = cfg.on_grid.then_some(PathGrid {
        beta: cfg.beta,
        gamma: cfg.gamma,
    });
    let s = seed::trial_seed(cfg.master_seed, t as u64);
    let paths = sample_paths(l, seed::derive(s, 0), grid, cfg.m, cfg.n)?;
    let truth = synth_channel(&paths, cfg.m, cfg.n)?;
    let y = add_pilot_noise(&truth, snr_db, cfg.pilot_power, seed::derive(s, 1))?;
    let norm = modulus_normalize(&to_angular_delay(&y, cfg.beta, cfg.gamma)?)?;
    Ok(Trial { truth, y, norm })
}

/// `[pipeline, ls, lmmse]` linear NMSE and whether the built-in detector was a fallback.
fn evaluate(
    cfg: &ExperimentConfig,
    l: usize,
    trial: &Trial,
    external: Option<&Result<Vec<Detection>>>,
    cov: &CovarianceModel,
) -> Result<([f64; 3], bool)> {
    let builtin = || -> Result<ChannelMatrix> {
        let dets = detect_peaks_builtin(&trial.norm.values, &peak_config(cfg, l))?;
        estimate_from_detections(&trial.y, &dets, cfg.beta, cfg.gamma)
    };
    let (pipeline, fell_back) = match external {
        None => (builtin()?, false),
        Some(Ok(dets)) => match estimate_from_detections(&trial.y, dets, cfg.beta, cfg.gamma) {
            Ok(h) => (h, false),
            Err(_) => (builtin()?, true),
        },
        Some(Err(_)) => (builtin()?, true),
    };
    let ls = ls_estimate(&trial.y)?;
    let lmmse = lmmse_estimate(&trial.y, cov)?;
    Ok((
        [
            nmse(&trial.truth, &pipeline)?.linear,
            nmse(&trial.truth, &ls)?.linear,
            nmse(&trial.truth, &lmmse)?.linear,
        ],
        fell_back,
    ))
}

/// Monte Carlo comparison of the detection pipeline against LS and LMMSE.
///
/// Trial `t` of every cell uses seed `master_seed ⊕ t`. NMSE is averaged
/// linearly over trials and then converted to dB.
pub fn run_ce_sweep(cfg: &ExperimentConfig) -> Result<CeSweep> {
    cfg.validate()?;
    let mode = cfg.parallelism();
    let external = match &cfg.detector {
        DetectorChoice::Builtin => None,
        DetectorChoice::External { endpoint, prompt } => Some(ExternalDetector {
            endpoint: endpoint.clone(),
            prompt: prompt.clone(),
            timeout: Duration::from_millis(cfg.timeout_ms),
            max_in_flight: cfg.max_in_flight,
        }),
    };
    let mut rows = Vec::new();
    for &l in &cfg.path_counts {
        let cov = covariance_for(cfg, l)?;
        for &snr in &cfg.snr_db_list {
            let trials = par::map_range(mode, cfg.trials, |t| make_trial(cfg, l, snr, t))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            let detections = match &external {
                None => Vec::new(),
                Some(client) => {
                    let images = trials
                        .iter()
                        .map(|t| encode_rgb_colormap(&t.norm))
                        .collect::<Result<Vec<CsiImage>>>()?;
                    let mut replies = detect_external_batch(&images, client);
                    if let Some(i) = replies.iter().position(|r| matches!(r, Err(e) if !e.is_external_service())) {
                        return Err(replies.swap_remove(i).expect_err("non-service error"));
                    }
                    replies
                }
            };
            let results = par::map_range(mode, trials.len(), |t| {
                evaluate(cfg, l, &trials[t], detections.get(t), &cov)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let fallbacks = results.iter().filter(|r| r.1).count();
            for (mi, method) in Method::ALL.into_iter().enumerate() {
                let mean = results.iter().map(|r| r.0[mi]).sum::<f64>() / results.len() as f64;
                rows.push(CeRow {
                    snr_db: snr,
                    path_count: l,
                    method,
                    mean_nmse_db: 10.0 * mean.log10(),
                    trials: results.len(),
                    fallbacks: if method == Method::Pipeline { fallbacks } else { 0 },
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        a.snr_db
            .total_cmp(&b.snr_db)
            .then(a.path_count.cmp(&b.path_count))
            .then(a.method.cmp(&b.method))
    });
    let csv = ce_csv(cfg, &rows);
    Ok(CeSweep { rows, csv })
}

fn ce_csv(cfg: &ExperimentConfig, rows: &[CeRow]) -> String {
    let mut s = cfg.comment_header();
    s.push_str("snr_db,path_count,method,mean_nmse_db,trials,fallbacks\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{:.6},{},{}",
            r.snr_db,
            r.path_count,
            r.method.name(),
            r.mean_nmse_db,
            r.trials,
            r.fallbacks
        )
        .expect("string write");
    }
    s
}
