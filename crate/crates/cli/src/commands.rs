use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use csi_core::channel::{add_pilot_noise, sample_paths, synth_channel, PathGrid};
use csi_core::detection::stub::unjet;
use csi_core::detection::{bbox_to_path, detect_external, detect_peaks_builtin, PeakDetectorConfig};
use csi_core::harness::{
    emit_plot, run_ce_sweep, run_har, run_loc, DetectorChoice, ExperimentConfig, Method, PlotKind, Task,
};
use csi_core::heads::{write_head, SavedHead};
use csi_core::imaging::{
    encode_rgb_colormap, encode_two_channel_zero, grayscale_reshape_resize, modulus_normalize, to_angular_delay,
    CsiImage, ModulusTensor,
};
use csi_core::io::{
    ingest_har_csv, synthetic_har, write_features, write_manifest, FeatureSet, Manifest, ManifestEntry,
    ManifestHeader, MockExtractor, TaskKind, HAR_CLASSES,
};
use csi_core::{par, seed, Error, Result};

use crate::{Command, DetectorKind, GlobalOpts, ImageEncoding, PlotArg};

const SYNTHETIC_HAR_STREAM: u64 = 0x4A5;

pub fn run(g: &GlobalOpts, cmd: &Command) -> Result<()> {
    match cmd {
        Command::CeSweep => ce_sweep(g),
        Command::HarTrain => har_train(g),
        Command::LocTrain => loc_train(g),
        Command::EncodeImage { encoding } => encode_image(g, *encoding),
        Command::Detect { image, count } => detect(g, image, *count),
        Command::ExtractMock { images, har_csv } => extract_mock(g, images, har_csv.as_deref()),
        Command::Plot { csv, kind } => plot(g, csv, *kind),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Config file, then command-line flags, then `--set` overrides.
fn load_config(g: &GlobalOpts, task: Task) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let cfg = ExperimentConfig::parse(&text, Some(task))?;
            if cfg.task != task {
                return Err(Error::Config(format!(
                    "{} is a {} config, not {}",
                    path.display(),
                    cfg.task.name(),
                    task.name()
                )));
            }
            cfg
        }
        None => ExperimentConfig::defaults(task),
    };
    let set = |cfg: &mut ExperimentConfig, k: &str, v: &str| cfg.set(k, v).map_err(Error::Config);
    if let Some(s) = g.seed {
        cfg.master_seed = s;
    }
    match g.detector {
        Some(DetectorKind::Builtin) if g.endpoint.is_some() => {
            return Err(Error::Config("--endpoint requires --detector external".into()))
        }
        Some(DetectorKind::Builtin) => cfg.detector = DetectorChoice::Builtin,
        Some(DetectorKind::External) => set(&mut cfg, "detector", "external")?,
        None => {}
    }
    if let Some(e) = &g.endpoint {
        set(&mut cfg, "endpoint", e)?;
    }
    if let Some(p) = &g.prompt {
        set(&mut cfg, "prompt", p)?;
    }
    if let Some(o) = &g.out {
        cfg.output_dir = o.clone();
    }
    for kv in &g.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got {kv:?}")))?;
        set(&mut cfg, k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| Error::File {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(dir)
}

fn ce_sweep(g: &GlobalOpts) -> Result<()> {
    let cfg = load_config(g, Task::CeSweep)?;
    let sweep = run_ce_sweep(&cfg)?;
    let path = output_dir(&cfg)?.join("ce_sweep.csv");
    write_bytes(&path, sweep.csv.as_bytes())?;
    for r in &sweep.rows {
        println!("snr={:>5} L={:>3} {:<8} {:>9.3} dB", r.snr_db, r.path_count, r.method.name(), r.mean_nmse_db);
    }
    println!("wrote {}", path.display());
    if let DetectorChoice::External { endpoint, .. } = &cfg.detector {
        let pipeline: Vec<_> = sweep.rows.iter().filter(|r| r.method == Method::Pipeline).collect();
        if pipeline.iter().all(|r| r.fallbacks == r.trials) {
            return Err(Error::Transport(format!(
                "every request to {endpoint} failed; pipeline rows used the built-in detector"
            )));
        }
    }
    Ok(())
}

fn har_train(g: &GlobalOpts) -> Result<()> {
    let cfg = load_config(g, Task::Har)?;
    let out = run_har(&cfg)?;
    let dir = output_dir(&cfg)?;
    let csv = dir.join("har.csv");
    write_bytes(&csv, out.csv.as_bytes())?;
    let mut head = Vec::new();
    write_head(&SavedHead::Dense(out.head), &mut head)?;
    write_bytes(&dir.join("har_head.bin"), &head)?;
    println!(
        "params={} train_accuracy={:.4} test_accuracy={:.4}",
        out.param_count, out.train_accuracy, out.test_accuracy
    );
    println!("wrote {}", csv.display());
    Ok(())
}

fn loc_train(g: &GlobalOpts) -> Result<()> {
    let cfg = load_config(g, Task::Loc)?;
    let out = run_loc(&cfg)?;
    let dir = output_dir(&cfg)?;
    let csv = dir.join("loc.csv");
    write_bytes(&csv, out.csv.as_bytes())?;
    for (snr, head) in out.heads {
        let mut buf = Vec::new();
        write_head(&SavedHead::Localization(head), &mut buf)?;
        write_bytes(&dir.join(format!("loc_head_snr{snr}.bin")), &buf)?;
    }
    for r in &out.results {
        println!(
            "snr={:>5} {:<12} params={:<7} mean_error={:.3} m",
            r.snr_db,
            r.method.name(),
            r.param_count,
            r.mean_error_m
        );
    }
    println!("wrote {}", csv.display());
    Ok(())
}

fn encode_image(g: &GlobalOpts, encoding: ImageEncoding) -> Result<()> {
    let cfg = load_config(g, Task::CeSweep)?;
    let (l, snr) = (cfg.path_counts[0], cfg.snr_db_list[0]);
    let grid = cfg.on_grid.then_some(PathGrid {
        beta: cfg.beta,
        gamma: cfg.gamma,
    });
    let paths = sample_paths(l, seed::derive(cfg.master_seed, 0), grid, cfg.m, cfg.n)?;
    let h = synth_channel(&paths, cfg.m, cfg.n)?;
    let y = add_pilot_noise(&h, snr, cfg.pilot_power, seed::derive(cfg.master_seed, 1))?;
    let map = to_angular_delay(&y, cfg.beta, cfg.gamma)?;
    let image = match encoding {
        ImageEncoding::Colormap => encode_rgb_colormap(&modulus_normalize(&map)?)?,
        ImageEncoding::TwoChannel => encode_two_channel_zero(&map, cfg.image_size, cfg.image_size)?.0,
    };
    let path = g.out.clone().unwrap_or_else(|| PathBuf::from("csi.png"));
    image.write_png(&path)?;
    println!("angle,delay,gain_re,gain_im");
    for p in &paths {
        println!("{},{},{},{}", p.angle, p.delay, p.gain.re, p.gain.im);
    }
    eprintln!("wrote {}x{} image to {}", image.width, image.height, path.display());
    Ok(())
}

fn detect(g: &GlobalOpts, image_path: &Path, count: Option<usize>) -> Result<()> {
    let cfg = load_config(g, Task::CeSweep)?;
    let image = CsiImage::read_png(image_path)?;
    let dets = match &cfg.detector {
        DetectorChoice::External { endpoint, prompt } => {
            detect_external(&image, prompt, endpoint, Duration::from_millis(cfg.timeout_ms))?
        }
        DetectorChoice::Builtin => {
            let mut pc = PeakDetectorConfig::for_oversampling(cfg.beta, cfg.gamma);
            pc.known_count = count;
            detect_peaks_builtin(&unjet(&image), &pc)?
        }
    };
    let mut text = String::from("center_w,center_h,confidence,angle,delay\n");
    for d in &dets {
        let p = bbox_to_path(d, image.width, image.height)?;
        writeln!(text, "{},{},{:.6},{},{}", d.center_w, d.center_h, d.confidence, p.angle, p.delay).expect("string write");
    }
    match &g.out {
        Some(path) => write_bytes(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn extract_mock(g: &GlobalOpts, images: &[PathBuf], har_csv: Option<&Path>) -> Result<()> {
    let cfg = load_config(g, Task::Har)?;
    let extractor = MockExtractor::new(cfg.k, cfg.master_seed);
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("features.fvec"));
    let to_row = |v: Vec<f64>| v.into_iter().map(|x| x as f32).collect::<Vec<f32>>();

    if !images.is_empty() {
        let mut sorted = images.to_vec();
        sorted.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
        let decoded = sorted.iter().map(|p| CsiImage::read_png(p)).collect::<Result<Vec<_>>>()?;
        let rows = par::map(cfg.parallelism(), &decoded, |img| to_row(extractor.features(img)));
        write_features(&out, &FeatureSet::new(extractor.source_id(), cfg.k, rows)?)?;
        println!("wrote {} feature rows of dim {} to {}", sorted.len(), cfg.k, out.display());
        return Ok(());
    }

    let groups: Vec<(ModulusTensor, usize)> = match har_csv {
        Some(p) => ingest_har_csv(p, cfg.har_t, cfg.har_m, cfg.har_n)?,
        None => synthetic_har(
            cfg.har_per_class,
            cfg.har_t,
            cfg.har_m,
            cfg.har_n,
            seed::derive(cfg.master_seed, SYNTHETIC_HAR_STREAM),
        )?,
    };
    let rows = par::map(cfg.parallelism(), &groups, |(t, _)| {
        grayscale_reshape_resize(t, cfg.image_size, cfg.image_size).map(|img| to_row(extractor.features(&img)))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    write_features(&out, &FeatureSet::new(extractor.source_id(), cfg.k, rows)?)?;
    let manifest = Manifest {
        header: ManifestHeader {
            task: TaskKind::Har,
            k: cfg.k,
            classes: Some(HAR_CLASSES),
            features: out.file_name().map(|n| n.to_string_lossy().into_owned()),
        },
        entries: groups
            .iter()
            .enumerate()
            .map(|(i, (_, label))| ManifestEntry {
                id: format!("g{i}"),
                feature_row: i,
                label: Some(*label),
                position: None,
                power: None,
            })
            .collect(),
    };
    let mpath = out.with_extension("jsonl");
    write_manifest(&mpath, &manifest)?;
    println!(
        "wrote {} feature rows of dim {} to {} and manifest {}",
        groups.len(),
        cfg.k,
        out.display(),
        mpath.display()
    );
    Ok(())
}

fn plot(g: &GlobalOpts, csv_path: &Path, kind: Option<PlotArg>) -> Result<()> {
    let text = read_text(csv_path)?;
    let kind = match kind {
        Some(PlotArg::Ce) => PlotKind::Ce,
        Some(PlotArg::Loc) => PlotKind::Loc,
        Some(PlotArg::Har) => PlotKind::Har,
        None => {
            let task = text
                .lines()
                .find_map(|l| l.strip_prefix("# task="))
                .ok_or_else(|| Error::Config(format!("{} has no task header; pass --kind", csv_path.display())))?;
            match task.trim().parse::<Task>().map_err(Error::Config)? {
                Task::CeSweep => PlotKind::Ce,
                Task::Har => PlotKind::Har,
                Task::Loc => PlotKind::Loc,
            }
        }
    };
    let svg = emit_plot(&text, kind)?;
    let out = g.out.clone().unwrap_or_else(|| csv_path.with_extension("svg"));
    write_bytes(&out, svg.as_bytes())?;
    println!("wrote {}", out.display());
    Ok(())
}
