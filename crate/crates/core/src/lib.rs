//! Spotlight SAR simulation, filtered backprojection imaging and
//! geometry-aided two-dimensional autofocus.
//!
//! Coordinates live in the slant plane with `x` along azimuth and `y` along
//! range; the radar flies on the `+y` side. Image spectra follow the
//! convention `f(x) = Σ S(k)·exp(−j·k·x)`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod autofocus;
pub mod dsp;
pub mod echo;
pub mod error;
pub mod fbp;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod run;
pub mod scenario;
pub mod spectrum;

pub use error::{Error, Result};
