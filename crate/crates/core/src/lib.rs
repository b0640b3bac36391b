//! Perceptual embedding of point-pattern correlations, edge-aware pair
//! correlation estimation, and synthesis of point patterns from density and
//! correlation maps.
//!
//! The crate is `no_std` compatible (it needs `alloc`). All floating-point
//! transcendental functions go through [`libm`] so results are bit-identical
//! across targets and feature sets. The optional `parallel` feature fans the
//! embarrassingly parallel loops out over rayon; every reduction keeps a fixed
//! order, so output does not depend on the thread count.
//!
//! Module map:
//!
//! * [`spectrum`]: Gaussian-mixture target spectra and radially averaged
//!   periodograms.
//! * [`realizer`]: spectrum-matching gradient descent producing basis patterns.
//! * [`features`]: splat rasterization, filter-bank Gram statistics and the
//!   L1 perceptual metric.
//! * [`embedding`]: MDS, latent alignment, IDW encoding and nearest-exemplar
//!   decoding.
//! * [`palette`]: the basis set plus the 256×256 PCF and learning-rate tables.
//! * [`pcf`]: the edge-aware (bilateral) PCF estimator.
//! * [`synth`]: density/correlation-map driven synthesis with ADAM.
//! * [`estimate`]: the inverse path from a pattern back to a feature image.
//! * [`color`] and [`image`]: CIELAB conversions and the feature image type.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is how argument checks reject NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod adam;
pub mod color;
pub mod embedding;
pub mod error;
pub mod estimate;
pub mod features;
pub mod field;
pub mod image;
pub mod knn;
pub mod matrix;
pub mod palette;
pub mod pattern;
pub mod pcf;
pub mod realizer;
pub mod rng;
pub mod spectrum;
pub mod synth;

mod par;

pub use error::{Error, Result};
pub use pattern::{Point, PointPattern};
