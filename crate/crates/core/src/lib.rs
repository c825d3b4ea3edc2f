//! Preprocessing toolkit for FMCW radar human-activity recognition.
//!
//! Two pipelines share the same kernels:
//!
//! ```text
//! dynamic:  scene -> slow-time signal -> WGN -> spectrogram -> {NS, EBD, ATh, APr, APr+ATh} -> metrics
//! static:   scene -> IQ cube -> range FFT -> Capon RA map -> cleanliness score -> lump tracking -> masks
//! ```
//!
//! Every stage is a pure function of its inputs (and an explicit seed where
//! randomness is involved).

pub mod config;
pub mod cube;
pub mod denoise;
pub mod dsp;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod quality;
pub mod ra_map;
pub mod render;
pub mod spectrogram;
pub mod synth;
pub mod tracker;

pub use cube::IqCube;
pub use error::{Error, Result};
