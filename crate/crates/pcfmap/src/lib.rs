//! File formats, CIELAB rasters, renders and charts around [`pcfmap_core`].
//!
//! Every writer goes through [`fsio::write_atomic`]: output lands in a
//! temporary file next to the target and is renamed into place, so readers
//! never observe a half-written file.

pub mod chart;
pub mod error;
pub mod features_file;
pub mod fsio;
pub mod palette_file;
pub mod points;
pub mod raster;
pub mod render;
pub mod spectra;

pub use error::{IoError, Result};
