//! Flat `key = value` experiment configuration.
//!
//! One assignment per line; `#` starts a comment line; lists are
//! comma-separated. Unknown or repeated keys are errors.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::par::Parallelism;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    CeSweep,
    Har,
    Loc,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::CeSweep => "ce_sweep",
            Task::Har => "har",
            Task::Loc => "loc",
        }
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ce_sweep" | "ce-sweep" => Ok(Task::CeSweep),
            "har" => Ok(Task::Har),
            "loc" => Ok(Task::Loc),
            other => Err(format!("unknown task {other:?} (expected ce_sweep, har or loc)")),
        }
    }
}

/// Localisation model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LocMethod {
    /// Localisation head on mock-extractor features.
    Mock,
    /// Localisation head on the flattened normalized CSI.
    NoFeatExt,
    /// Trained convolutional extractor plus localisation head.
    ConvFeatExt,
}

impl LocMethod {
    pub fn name(self) -> &'static str {
        match self {
            LocMethod::Mock => "mock",
            LocMethod::NoFeatExt => "nofeatext",
            LocMethod::ConvFeatExt => "convfeatext",
        }
    }
}

impl FromStr for LocMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mock" => Ok(LocMethod::Mock),
            "nofeatext" => Ok(LocMethod::NoFeatExt),
            "convfeatext" => Ok(LocMethod::ConvFeatExt),
            other => Err(format!("unknown localisation method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DetectorChoice {
    Builtin,
    External { endpoint: String, prompt: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub m: usize,
    pub n: usize,
    pub beta: usize,
    pub gamma: usize,
    pub path_counts: Vec<usize>,
    pub snr_db_list: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub detector: DetectorChoice,
    pub timeout_ms: u64,
    pub max_in_flight: usize,
    /// Hand the true path count to the built-in detector.
    pub known_count: bool,
    /// Snap sampled paths to the oversampled grid.
    pub on_grid: bool,
    pub pilot_power: f64,
    /// Noiseless channels used to estimate the LMMSE covariance.
    pub covariance_samples: usize,
    /// 0 = all cores, 1 = sequential.
    pub workers: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Feature dimension `K`.
    pub k: usize,
    /// External feature file and manifest; synthetic data is generated when unset.
    pub features: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub har_per_class: usize,
    pub har_t: usize,
    pub har_m: usize,
    pub har_n: usize,
    pub test_fraction: f64,
    pub loc_samples: usize,
    pub loc_paths: usize,
    pub image_size: usize,
    pub conv_filters: [usize; 3],
    pub loc_methods: Vec<LocMethod>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Defaults for `task`, sized for a desktop run.
    pub fn defaults(task: Task) -> Self {
        let base = ExperimentConfig {
            task,
            m: 64,
            n: 64,
            beta: 4,
            gamma: 4,
            path_counts: vec![2, 4, 6, 8, 10],
            snr_db_list: vec![0.0, 2.5, 5.0, 7.5, 10.0],
            trials: 50,
            master_seed: 0,
            detector: DetectorChoice::Builtin,
            timeout_ms: 10_000,
            max_in_flight: 4,
            known_count: true,
            on_grid: true,
            pilot_power: 1.0,
            covariance_samples: 1000,
            workers: 0,
            epochs: 256,
            batch_size: 200,
            learning_rate: 1e-3,
            k: 2048,
            features: None,
            manifest: None,
            har_per_class: 40,
            har_t: 250,
            har_m: 3,
            har_n: 30,
            test_fraction: 0.2,
            loc_samples: 2000,
            loc_paths: 10,
            image_size: 224,
            conv_filters: [8, 32, 1024],
            loc_methods: vec![LocMethod::Mock, LocMethod::NoFeatExt, LocMethod::ConvFeatExt],
            output_dir: PathBuf::from("out"),
        };
        match task {
            Task::CeSweep | Task::Har => base,
            Task::Loc => ExperimentConfig {
                m: 56,
                n: 56,
                beta: 2,
                gamma: 2,
                snr_db_list: vec![10.0],
                epochs: 40,
                k: 512,
                image_size: 112,
                loc_samples: 3000,
                loc_methods: vec![LocMethod::Mock, LocMethod::NoFeatExt],
                ..base
            },
        }
    }

    pub fn parallelism(&self) -> Parallelism {
        Parallelism::from_workers(self.workers)
    }

    /// Parses a config file. `task` must be given either in the text or as `default_task`.
    pub fn parse(text: &str, default_task: Option<Task>) -> Result<Self> {
        let mut pairs: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let key = k.trim().to_string();
            if pairs.iter().any(|(_, existing, _)| *existing == key) {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", i + 1)));
            }
            pairs.push((i + 1, key, v.trim().to_string()));
        }
        let task = match pairs.iter().find(|(_, k, _)| k == "task") {
            Some((line, _, v)) => v.parse().map_err(|e| Error::Config(format!("line {line}: {e}")))?,
            None => default_task.ok_or_else(|| Error::Config("missing key \"task\"".into()))?,
        };
        let mut cfg = ExperimentConfig::defaults(task);
        for (line, key, value) in &pairs {
            if key != "task" {
                cfg.set(key, value).map_err(|e| Error::Config(format!("line {line}: {e}")))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn one<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
        }
        fn list<T: FromStr>(key: &str, v: &str) -> std::result::Result<Vec<T>, String> {
            v.split(',').map(|s| one(key, s.trim())).collect()
        }
        fn flag(key: &str, v: &str) -> std::result::Result<bool, String> {
            match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(format!("{key}: expected true or false, got {v:?}")),
            }
        }
        match key {
            "m" => self.m = one(key, value)?,
            "n" => self.n = one(key, value)?,
            "beta" => self.beta = one(key, value)?,
            "gamma" => self.gamma = one(key, value)?,
            "path_counts" => self.path_counts = list(key, value)?,
            "snr_db_list" => self.snr_db_list = list(key, value)?,
            "trials" => self.trials = one(key, value)?,
            "master_seed" | "seed" => self.master_seed = one(key, value)?,
            "detector" => {
                self.detector = match value {
                    "builtin" => DetectorChoice::Builtin,
                    "external" => match &self.detector {
                        DetectorChoice::External { .. } => self.detector.clone(),
                        DetectorChoice::Builtin => DetectorChoice::External {
                            endpoint: String::new(),
                            prompt: crate::detection::DEFAULT_PROMPT.to_string(),
                        },
                    },
                    other => return Err(format!("detector: expected builtin or external, got {other:?}")),
                }
            }
            "endpoint" | "prompt" => {
                let (mut endpoint, mut prompt) = match &self.detector {
                    DetectorChoice::External { endpoint, prompt } => (endpoint.clone(), prompt.clone()),
                    DetectorChoice::Builtin => (String::new(), crate::detection::DEFAULT_PROMPT.to_string()),
                };
                if key == "endpoint" {
                    endpoint = value.to_string();
                } else {
                    prompt = value.to_string();
                }
                self.detector = DetectorChoice::External { endpoint, prompt };
            }
            "timeout_ms" => self.timeout_ms = one(key, value)?,
            "max_in_flight" => self.max_in_flight = one(key, value)?,
            "known_count" => self.known_count = flag(key, value)?,
            "on_grid" => self.on_grid = flag(key, value)?,
            "pilot_power" => self.pilot_power = one(key, value)?,
            "covariance_samples" => self.covariance_samples = one(key, value)?,
            "workers" => self.workers = one(key, value)?,
            "epochs" => self.epochs = one(key, value)?,
            "batch_size" => self.batch_size = one(key, value)?,
            "learning_rate" => self.learning_rate = one(key, value)?,
            "k" => self.k = one(key, value)?,
            "features" => self.features = Some(PathBuf::from(value)),
            "manifest" => self.manifest = Some(PathBuf::from(value)),
            "har_per_class" => self.har_per_class = one(key, value)?,
            "har_t" => self.har_t = one(key, value)?,
            "har_m" => self.har_m = one(key, value)?,
            "har_n" => self.har_n = one(key, value)?,
            "test_fraction" => self.test_fraction = one(key, value)?,
            "loc_samples" => self.loc_samples = one(key, value)?,
            "loc_paths" => self.loc_paths = one(key, value)?,
            "image_size" => self.image_size = one(key, value)?,
            "conv_filters" => {
                let v: Vec<usize> = list(key, value)?;
                self.conv_filters = v
                    .try_into()
                    .map_err(|_| "conv_filters: expected three values".to_string())?;
            }
            "loc_methods" => {
                let mut v: Vec<LocMethod> = value
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| format!("loc_methods: {e}"))?;
                v.sort();
                v.dedup();
                self.loc_methods = v;
            }
            "output_dir" => self.output_dir = PathBuf::from(value),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if [self.m, self.n, self.beta, self.gamma].contains(&0) {
            return bad("m, n, beta and gamma must be positive");
        }
        if self.path_counts.is_empty() || self.path_counts.contains(&0) {
            return bad("path_counts must be a non-empty list of positive integers");
        }
        if self.path_counts.iter().any(|&l| l > self.m * self.n) {
            return bad("path count exceeds m*n");
        }
        if self.snr_db_list.is_empty() || self.snr_db_list.iter().any(|s| s.is_nan()) {
            return bad("snr_db_list must be a non-empty list of numbers");
        }
        if self.trials == 0 {
            return bad("trials must be positive");
        }
        if !(self.pilot_power > 0.0 && self.pilot_power.is_finite()) {
            return bad("pilot_power must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return bad("epochs, batch_size and learning_rate must be positive");
        }
        if self.k == 0 || self.image_size == 0 || self.max_in_flight == 0 {
            return bad("k, image_size and max_in_flight must be positive");
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad("test_fraction must lie in (0, 1)");
        }
        if self.har_per_class == 0 || self.har_t == 0 || self.har_m == 0 || self.har_n == 0 {
            return bad("har_per_class, har_t, har_m and har_n must be positive");
        }
        if self.loc_samples < 2 || self.loc_paths == 0 || self.conv_filters.contains(&0) {
            return bad("loc_samples must be at least 2; loc_paths and conv_filters positive");
        }
        if self.loc_methods.is_empty() {
            return bad("loc_methods must name at least one method");
        }
        if self.features.is_some() != self.manifest.is_some() {
            return bad("features and manifest must be given together");
        }
        if let DetectorChoice::External { endpoint, .. } = &self.detector {
            if endpoint.is_empty() {
                return bad("external detector requires an endpoint");
            }
        }
        Ok(())
    }

    /// The fully resolved configuration, one `# key=value` comment per line.
    pub fn comment_header(&self) -> String {
        fn join<T: std::fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "# {k}={v}").expect("string write");
        kv("task", self.task.name().into());
        kv("master_seed", self.master_seed.to_string());
        kv("m", self.m.to_string());
        kv("n", self.n.to_string());
        kv("beta", self.beta.to_string());
        kv("gamma", self.gamma.to_string());
        kv("path_counts", join(&self.path_counts));
        kv("snr_db_list", join(&self.snr_db_list));
        kv("trials", self.trials.to_string());
        match &self.detector {
            DetectorChoice::Builtin => kv("detector", "builtin".into()),
            DetectorChoice::External { endpoint, prompt } => {
                kv("detector", "external".into());
                kv("endpoint", endpoint.clone());
                kv("prompt", prompt.clone());
            }
        }
        kv("timeout_ms", self.timeout_ms.to_string());
        kv("max_in_flight", self.max_in_flight.to_string());
        kv("known_count", self.known_count.to_string());
        kv("on_grid", self.on_grid.to_string());
        kv("pilot_power", self.pilot_power.to_string());
        kv("covariance_samples", self.covariance_samples.to_string());
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("learning_rate", self.learning_rate.to_string());
        kv("k", self.k.to_string());
        if let (Some(f), Some(m)) = (&self.features, &self.manifest) {
            kv("features", f.display().to_string());
            kv("manifest", m.display().to_string());
        }
        kv("har_per_class", self.har_per_class.to_string());
        kv("har_t", self.har_t.to_string());
        kv("har_m", self.har_m.to_string());
        kv("har_n", self.har_n.to_string());
        kv("test_fraction", self.test_fraction.to_string());
        kv("loc_samples", self.loc_samples.to_string());
        kv("loc_paths", self.loc_paths.to_string());
        kv("image_size", self.image_size.to_string());
        kv("conv_filters", join(&self.conv_filters));
        kv(
            "loc_methods",
            self.loc_methods.iter().map(|m| m.name()).collect::<Vec<_>>().join(","),
        );
        s
    }
}
