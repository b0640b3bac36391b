use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A position in the unit domain. `y` follows image convention (row 0 at the
/// top), matching how feature images are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_squared(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(self, other: Point) -> f64 {
        libm::sqrt(self.distance_squared(other))
    }

    pub fn in_unit_square(self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }

    pub fn clamp_unit(self) -> Self {
        Self::new(self.x.clamp(0.0, 1.0), self.y.clamp(0.0, 1.0))
    }

    /// Toroidal wrap into `[0, 1)`.
    pub fn wrap(self) -> Self {
        Self::new(wrap_unit(self.x), wrap_unit(self.y))
    }
}

pub(crate) fn wrap_unit(v: f64) -> f64 {
    let w = v - libm::floor(v);
    // `v` slightly below an integer can round up to exactly 1.0
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Ordered 2D points in `[0,1]²` with optional per-point dot radii.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointPattern {
    points: Vec<Point>,
    radii: Option<Vec<f64>>,
}

impl PointPattern {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        for p in &points {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::InvalidPattern("non-finite coordinate"));
            }
            if !p.in_unit_square() {
                return Err(Error::InvalidPattern("coordinate outside [0,1]"));
            }
        }
        Ok(Self { points, radii: None })
    }

    pub fn with_radii(points: Vec<Point>, radii: Vec<f64>) -> Result<Self> {
        let mut pattern = Self::new(points)?;
        pattern.set_radii(radii)?;
        Ok(pattern)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn set_radii(&mut self, radii: Vec<f64>) -> Result<()> {
        if radii.len() != self.points.len() {
            return Err(Error::DimensionMismatch { expected: self.points.len(), actual: radii.len() });
        }
        if radii.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidPattern("radii must be positive and finite"));
        }
        self.radii = Some(radii);
        Ok(())
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn radii(&self) -> Option<&[f64]> {
        self.radii.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    /// Shifts every point by `(dx, dy)` modulo 1. Radii are kept.
    pub fn translated_toroidal(&self, dx: f64, dy: f64) -> Self {
        let points = self.points.iter().map(|p| Point::new(p.x + dx, p.y + dy).wrap()).collect();
        Self { points, radii: self.radii.clone() }
    }

    /// Mean distance from each point to its nearest neighbour.
    pub fn mean_nearest_neighbor_distance(&self) -> Option<f64> {
        if self.points.len() < 2 {
            return None;
        }
        let grid = crate::knn::NeighborGrid::new(&self.points);
        let total: f64 = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let nn = grid.k_nearest(&self.points, *p, 1, Some(i));
                p.distance(self.points[nn[0]])
            })
            .sum();
        Some(total / self.points.len() as f64)
    }
}
