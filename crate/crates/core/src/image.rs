//! Feature images: lightness carries density, the chroma plane carries the
//! latent correlation coordinate.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::pixel_index;
use crate::pattern::Point;

/// Row-major W×H raster. `l` is CIELAB lightness in `[0,100]`; `u`, `v` are
/// latent coordinates in `[0,1]`. Row 0 is the top of the image (`y = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImage {
    width: usize,
    height: usize,
    l: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl FeatureImage {
    pub fn new(width: usize, height: usize, l: Vec<f64>, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image dimensions must be positive"));
        }
        let n = width * height;
        for len in [l.len(), u.len(), v.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, actual: len });
            }
        }
        if l.iter().any(|x| !(0.0..=100.0).contains(x)) {
            return Err(Error::InvalidArgument("lightness must lie in [0,100]"));
        }
        if u.iter().chain(v.iter()).any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidArgument("latent coordinates must lie in [0,1]"));
        }
        Ok(Self { width, height, l, u, v })
    }

    pub fn uniform(width: usize, height: usize, lightness: f64, latent: (f64, f64)) -> Result<Self> {
        let n = width * height;
        Self::new(width, height, vec![lightness; n], vec![latent.0; n], vec![latent.1; n])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn lightness(&self) -> &[f64] {
        &self.l
    }

    pub fn latent_u(&self) -> &[f64] {
        &self.u
    }

    pub fn latent_v(&self) -> &[f64] {
        &self.v
    }

    fn index_of(&self, p: Point) -> usize {
        pixel_index(p.y, self.height) * self.width + pixel_index(p.x, self.width)
    }

    /// Latent coordinate of the pixel containing `p`.
    pub fn latent_at(&self, p: Point) -> (f64, f64) {
        let i = self.index_of(p);
        (self.u[i], self.v[i])
    }

    pub fn lightness_at(&self, p: Point) -> f64 {
        self.l[self.index_of(p)]
    }

    /// Ink density `1 − L/100` of the pixel containing `p`.
    pub fn ink_at(&self, p: Point) -> f64 {
        1.0 - self.lightness_at(p) / 100.0
    }

    pub fn ink(&self) -> Vec<f64> {
        self.l.iter().map(|l| 1.0 - l / 100.0).collect()
    }

    pub fn mean_ink(&self) -> f64 {
        self.l.iter().map(|l| 1.0 - l / 100.0).sum::<f64>() / self.l.len() as f64
    }

    pub fn pixel_center(&self, col: usize, row: usize) -> Point {
        Point::new((col as f64 + 0.5) / self.width as f64, (row as f64 + 0.5) / self.height as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_ranges() {
        assert!(FeatureImage::uniform(2, 2, 101.0, (0.5, 0.5)).is_err());
        assert!(FeatureImage::uniform(2, 2, 50.0, (1.5, 0.5)).is_err());
        assert!(FeatureImage::new(2, 2, vec![0.0; 3], vec![0.0; 4], vec![0.0; 4]).is_err());
    }

    #[test]
    fn pixel_lookup_uses_containing_pixel() {
        let img = FeatureImage::new(2, 1, vec![0.0, 100.0], vec![0.1, 0.9], vec![0.2, 0.8]).unwrap();
        assert_eq!(img.latent_at(Point::new(0.25, 0.5)), (0.1, 0.2));
        assert_eq!(img.latent_at(Point::new(1.0, 0.5)), (0.9, 0.8));
        assert_eq!(img.ink_at(Point::new(0.75, 0.0)), 0.0);
        assert_eq!(img.mean_ink(), 0.5);
    }
}
