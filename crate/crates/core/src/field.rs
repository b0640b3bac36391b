//! Raster fields sampled bilinearly at continuous positions in `[0,1]²`.
//!
//! Samples sit at pixel centres `((i + 0.5)/W, (j + 0.5)/H)`; outside the
//! outermost centres the field is held constant (clamp-to-edge).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::pattern::Point;

/// Bilinear stencil along one axis: two indices, the weight of the second,
/// and d(weight)/d(coordinate) (zero in the clamped margins).
#[derive(Debug, Clone, Copy)]
struct Axis {
    i0: usize,
    i1: usize,
    t: f64,
    dt: f64,
}

fn axis(coord: f64, size: usize) -> Axis {
    let f = coord * size as f64 - 0.5;
    if size == 1 || f <= 0.0 {
        return Axis { i0: 0, i1: 0, t: 0.0, dt: 0.0 };
    }
    let last = (size - 1) as f64;
    if f >= last {
        return Axis { i0: size - 1, i1: size - 1, t: 0.0, dt: 0.0 };
    }
    let i0 = libm::floor(f) as usize;
    Axis { i0, i1: i0 + 1, t: f - i0 as f64, dt: size as f64 }
}

/// Scalar raster, e.g. the local length-scale map `d(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("field dimensions must be positive"));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch { expected: width * height, actual: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("field values must be finite"));
        }
        Ok(Self { width, height, data })
    }

    pub fn uniform(value: f64) -> Self {
        Self { width: 1, height: 1, data: vec![value] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_uniform(&self) -> bool {
        self.data.iter().all(|&v| v == self.data[0])
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn sample(&self, p: Point) -> f64 {
        let ax = axis(p.x, self.width);
        let ay = axis(p.y, self.height);
        let w = self.width;
        let v00 = self.data[ay.i0 * w + ax.i0];
        let v10 = self.data[ay.i0 * w + ax.i1];
        let v01 = self.data[ay.i1 * w + ax.i0];
        let v11 = self.data[ay.i1 * w + ax.i1];
        let top = v00 + (v10 - v00) * ax.t;
        let bottom = v01 + (v11 - v01) * ax.t;
        top + (bottom - top) * ay.t
    }

    /// Value of the field at the pixel containing `p` (no interpolation).
    pub fn nearest(&self, p: Point) -> f64 {
        let col = pixel_index(p.x, self.width);
        let row = pixel_index(p.y, self.height);
        self.get(col, row)
    }
}

pub(crate) fn pixel_index(coord: f64, size: usize) -> usize {
    let i = libm::floor(coord * size as f64);
    if i <= 0.0 {
        0
    } else {
        (i as usize).min(size - 1)
    }
}

/// Raster of `dim`-dimensional guide vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceField {
    width: usize,
    height: usize,
    dim: usize,
    data: Vec<f64>,
}

impl GuidanceField {
    pub fn new(width: usize, height: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || dim == 0 {
            return Err(Error::InvalidArgument("field dimensions must be positive"));
        }
        if data.len() != width * height * dim {
            return Err(Error::DimensionMismatch { expected: width * height * dim, actual: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("guide values must be finite"));
        }
        Ok(Self { width, height, dim, data })
    }

    pub fn uniform(vector: &[f64]) -> Self {
        Self { width: 1, height: 1, dim: vector.len(), data: vector.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_uniform(&self) -> bool {
        self.data.chunks_exact(self.dim).all(|c| c == &self.data[..self.dim])
    }

    pub fn texel(&self, col: usize, row: usize) -> &[f64] {
        let at = (row * self.width + col) * self.dim;
        &self.data[at..at + self.dim]
    }

    pub fn sample_into(&self, p: Point, out: &mut [f64]) {
        let ax = axis(p.x, self.width);
        let ay = axis(p.y, self.height);
        let (a, b, c, d) = self.corners(&ax, &ay);
        for k in 0..self.dim {
            let top = a[k] + (b[k] - a[k]) * ax.t;
            let bottom = c[k] + (d[k] - c[k]) * ax.t;
            out[k] = top + (bottom - top) * ay.t;
        }
    }

    pub fn sample(&self, p: Point) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.sample_into(p, &mut out);
        out
    }

    /// Value plus partial derivatives w.r.t. `x` and `y`.
    pub fn sample_with_gradient(&self, p: Point, out: &mut [f64], ddx: &mut [f64], ddy: &mut [f64]) {
        let ax = axis(p.x, self.width);
        let ay = axis(p.y, self.height);
        let (a, b, c, d) = self.corners(&ax, &ay);
        for k in 0..self.dim {
            let top = a[k] + (b[k] - a[k]) * ax.t;
            let bottom = c[k] + (d[k] - c[k]) * ax.t;
            out[k] = top + (bottom - top) * ay.t;
            let dtop = (b[k] - a[k]) * ax.dt;
            let dbottom = (d[k] - c[k]) * ax.dt;
            ddx[k] = dtop + (dbottom - dtop) * ay.t;
            ddy[k] = (bottom - top) * ay.dt;
        }
    }

    fn corners(&self, ax: &Axis, ay: &Axis) -> (&[f64], &[f64], &[f64], &[f64]) {
        (self.texel(ax.i0, ay.i0), self.texel(ax.i1, ay.i0), self.texel(ax.i0, ay.i1), self.texel(ax.i1, ay.i1))
    }
}
