//! Wavelet time-frequency imaging and CNN classification of induction-motor
//! phase currents.
//!
//! The pipeline runs in four stages, each usable on its own:
//!
//! 1. [`signal`] synthesizes labelled motor-current records.
//! 2. [`cwt`] and [`ssq`] turn a record into a scalogram or a
//!    synchrosqueezed energy map, using the wavelets in [`wavelet`].
//! 3. [`raster`] renders the map as a 32x32 RGB image.
//! 4. [`cnn`] and [`eval`] train and cross-validate a small CNN on the
//!    images.
//!
//! [`pipeline`] chains stages 2 and 3 for the five transform codes and
//! [`cli`] drives the whole thing from a JSON config.

pub mod cli;
pub mod cnn;
pub mod config;
pub mod cwt;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod numerics;
pub mod pipeline;
pub mod raster;
pub mod signal;
pub mod ssq;
pub mod wavelet;

pub use error::{Error, Result};
