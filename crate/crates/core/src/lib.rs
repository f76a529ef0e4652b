//! Workbench for detection-based massive-MIMO channel estimation and
//! CSI-as-image sensing.
//!
//! The crate is organised around the data flow of the pipeline:
//!
//! * [`channel`] synthesises multipath spatial-frequency channels and noisy
//!   pilot observations.
//! * [`imaging`] maps observations to the oversampled angular-delay domain
//!   and encodes them as 8-bit RGB images.
//! * [`detection`] finds path spots in those images, either with the built-in
//!   peak detector or through an external detection service.
//! * [`estimation`] fits path gains, reconstructs channels and provides the
//!   LS/LMMSE baselines and the NMSE metric.
//! * [`heads`] holds the small trainable networks that sit on top of frozen
//!   image features, together with Adam and gradient checking.
//! * [`io`] covers feature files, manifests, the mock extractor and dataset
//!   generation.
//! * [`harness`] runs the three experiment families and writes CSV/SVG output.

pub mod channel;
pub mod detection;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod heads;
pub mod imaging;
pub mod io;
pub mod par;
pub mod seed;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Dense complex matrix used for channels, observations and angular-delay maps.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;
