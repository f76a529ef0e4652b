//! `csiwb`: command-line front end for the CSI workbench.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use csi_core::Error;

#[derive(Parser, Debug)]
#[command(name = "csiwb", version, about = "Detection-based channel estimation and CSI-as-image experiments")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct GlobalOpts {
    /// Flat `key = value` config file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for experiments, output file for single-artifact commands.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    detector: Option<DetectorKind>,
    /// Detection service base URL; implies `--detector external`.
    #[arg(long, global = true, value_name = "URL")]
    endpoint: Option<String>,
    /// Prompt sent to the detection service.
    #[arg(long, global = true)]
    prompt: Option<String>,
    /// Extra `key=value` config override, applied last. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum DetectorKind {
    Builtin,
    External,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ImageEncoding {
    Colormap,
    TwoChannel,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum PlotArg {
    Ce,
    Loc,
    Har,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// NMSE sweep of the detection pipeline against LS and LMMSE.
    CeSweep,
    /// Train the dense head on HAR features.
    HarTrain,
    /// Train the localisation heads on generated users.
    LocTrain,
    /// Synthesise one noisy channel and write its angular-delay image as PNG.
    EncodeImage {
        #[arg(long, value_enum, default_value = "colormap")]
        encoding: ImageEncoding,
    },
    /// Detect path spots in a colormap PNG.
    Detect {
        image: PathBuf,
        /// Stop after this many peaks (built-in detector only).
        #[arg(long)]
        count: Option<usize>,
    },
    /// Mock-extractor features for PNG files, a HAR CSV, or synthetic HAR data.
    ExtractMock {
        /// PNG images; rows follow sorted file names.
        images: Vec<PathBuf>,
        /// Labelled HAR groups to encode and extract instead of images.
        #[arg(long, value_name = "PATH", conflicts_with = "images")]
        har_csv: Option<PathBuf>,
    },
    /// Render a harness CSV as SVG.
    Plot {
        csv: PathBuf,
        /// Inferred from the CSV's `# task=` header when omitted.
        #[arg(long, value_enum)]
        kind: Option<PlotArg>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        e if e.is_external_service() => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli.global, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
