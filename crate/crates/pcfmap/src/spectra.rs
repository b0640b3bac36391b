//! Radial power spectra as JSON arrays of reals.

use std::path::Path;

use pcfmap_core::spectrum::RadialPowerSpectrum;

use crate::error::{IoError, Result};
use crate::fsio;

pub fn write_spectrum(spectrum: &RadialPowerSpectrum, path: &Path) -> Result<()> {
    let text = serde_json::to_string(spectrum.bins()).map_err(|e| IoError::format(path, e.to_string()))?;
    fsio::write_atomic(path, text.as_bytes())
}

pub fn read_spectrum(path: &Path) -> Result<RadialPowerSpectrum> {
    let bytes = fsio::read(path)?;
    let bins: Vec<f64> = serde_json::from_slice(&bytes).map_err(|e| IoError::format(path, e.to_string()))?;
    RadialPowerSpectrum::new(bins).map_err(|e| IoError::format(path, e.to_string()))
}
