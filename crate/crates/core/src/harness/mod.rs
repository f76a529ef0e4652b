//! Config-driven experiment runners that emit CSV tables and SVG plots.

mod ce;
mod config;
mod har;
mod loc;
mod plot;

pub use ce::{covariance_for, run_ce_sweep, CeRow, CeSweep, Method};
pub use config::{DetectorChoice, ExperimentConfig, LocMethod, Task};
pub use har::{run_har, stratified_split, HarOutcome};
pub use loc::{run_loc, LocOutcome, LocResult};
pub use plot::{emit_plot, PlotKind};
