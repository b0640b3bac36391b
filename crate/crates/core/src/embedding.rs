//! Metric MDS into the plane, latent-space canonicalization, inverse
//! distance weighted encoding and nearest-exemplar decoding.

use alloc::vec;
use alloc::vec::Vec;

use crate::adam::{Adam, AdamParams};
use crate::error::{Error, Result};
use crate::features::{feature_l2_distance, FeatureVector};
use crate::matrix::SquareMatrix;
use crate::pcf::Pcf;
use crate::rng::SplitRng;

pub const MDS_LEARNING_RATE: f64 = 0.005;
pub const MDS_BATCH: usize = 20;
pub const MDS_ITERATIONS: usize = 1000;

pub const PARZEN_WINDOW: f64 = 0.01;
pub const LOCALITY_RANGE: (f64, f64) = (3.0, 6.0);
pub const IDW_FLOOR: f64 = 1e-10;

/// Normalized chroma-plane coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentCoordinate {
    pub u: f64,
    pub v: f64,
}

impl LatentCoordinate {
    pub fn new(u: f64, v: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument("latent coordinate outside [0,1]²"));
        }
        Ok(Self { u, v })
    }

    pub fn distance(self, other: LatentCoordinate) -> f64 {
        libm::hypot(self.u - other.u, self.v - other.v)
    }
}

#[derive(Debug, Clone)]
pub struct MdsResult {
    /// Raw planar coordinates, before alignment and normalization.
    pub coords: Vec<[f64; 2]>,
    pub initial_stress: f64,
    pub final_stress: f64,
}

fn validate_dissimilarity(m: &SquareMatrix) -> Result<()> {
    let n = m.size();
    if n == 0 {
        return Err(Error::InvalidMatrix("empty matrix"));
    }
    for i in 0..n {
        if m.get(i, i) != 0.0 {
            return Err(Error::InvalidMatrix("diagonal must be zero"));
        }
        for j in 0..n {
            let v = m.get(i, j);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidMatrix("entries must be finite and non-negative"));
            }
        }
    }
    if !m.is_symmetric() {
        return Err(Error::InvalidMatrix("matrix must be symmetric"));
    }
    Ok(())
}

/// `Σ_{i≠j} (δ_ij − ‖z_i − z_j‖)²` over ordered pairs.
pub fn stress(dissimilarity: &SquareMatrix, coords: &[[f64; 2]]) -> f64 {
    let n = coords.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = libm::hypot(coords[i][0] - coords[j][0], coords[i][1] - coords[j][1]);
                let e = dissimilarity.get(i, j) - d;
                total += e * e;
            }
        }
    }
    total
}

/// Stress minimization by ADAM on row batches. Coordinates start uniform in
/// `[0,1]²`; each epoch visits the rows in a fresh seeded order, 20 at a
/// time, and a step follows the gradient of all pair terms of the batch rows.
pub fn mds_embed(dissimilarity: &SquareMatrix, seed: u64) -> Result<MdsResult> {
    mds_embed_with(dissimilarity, seed, MDS_ITERATIONS)
}

pub fn mds_embed_with(dissimilarity: &SquareMatrix, seed: u64, iterations: usize) -> Result<MdsResult> {
    validate_dissimilarity(dissimilarity)?;
    let n = dissimilarity.size();
    let mut rng = SplitRng::new(seed);
    let mut x: Vec<f64> = (0..2 * n).map(|_| rng.uniform()).collect();
    let as_coords = |x: &[f64]| x.chunks_exact(2).map(|c| [c[0], c[1]]).collect::<Vec<_>>();
    let initial_stress = stress(dissimilarity, &as_coords(&x));
    let mut adam = Adam::new(2 * n, AdamParams::default());
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let mut grad = vec![0.0; 2 * n];
    for _ in 0..iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for _ in 0..MDS_BATCH.min(n) {
            if cursor == n {
                rng.shuffle(&mut order);
                cursor = 0;
            }
            let i = order[cursor];
            cursor += 1;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let dx = x[2 * i] - x[2 * j];
                let dy = x[2 * i + 1] - x[2 * j + 1];
                let d = libm::hypot(dx, dy);
                if d < 1e-12 {
                    continue;
                }
                // d/dz_i (δ − d)² = −2(δ − d)(z_i − z_j)/d
                let c = -2.0 * (dissimilarity.get(i, j) - d) / d;
                grad[2 * i] += c * dx;
                grad[2 * i + 1] += c * dy;
                grad[2 * j] -= c * dx;
                grad[2 * j + 1] -= c * dy;
            }
        }
        adam.step(&mut x, &grad, MDS_LEARNING_RATE);
    }
    let coords = as_coords(&x);
    let final_stress = stress(dissimilarity, &coords);
    Ok(MdsResult { coords, initial_stress, final_stress })
}

/// Rotates about the centroid so that `coords[blue_index]` lies straight
/// towards smaller `v` (the blue end of the B axis), then min-max normalizes
/// each axis to `[0,1]`. An axis with zero extent maps to 0.5.
pub fn align_and_normalize(coords: &[[f64; 2]], blue_index: usize) -> Result<Vec<LatentCoordinate>> {
    if blue_index >= coords.len() {
        return Err(Error::InvalidArgument("blue_index out of range"));
    }
    if coords.iter().all(|c| c == &coords[0]) {
        return Err(Error::DegenerateCoordinates);
    }
    let n = coords.len() as f64;
    let cx = coords.iter().map(|c| c[0]).sum::<f64>() / n;
    let cy = coords.iter().map(|c| c[1]).sum::<f64>() / n;
    let wx = coords[blue_index][0] - cx;
    let wy = coords[blue_index][1] - cy;
    let len = libm::hypot(wx, wy);
    // R = [[c, −s], [s, c]] with R·w = (0, −|w|)
    let (c, s) = if len > 0.0 { (-wy / len, -wx / len) } else { (1.0, 0.0) };
    let rotated: Vec<[f64; 2]> = coords
        .iter()
        .map(|p| {
            let (x, y) = (p[0] - cx, p[1] - cy);
            [c * x - s * y, s * x + c * y]
        })
        .collect();
    let bounds = |axis: usize| {
        rotated.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[axis]), hi.max(p[axis])))
    };
    let (ux, vx) = (bounds(0), bounds(1));
    let norm = |v: f64, (lo, hi): (f64, f64)| if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
    Ok(rotated.iter().map(|p| LatentCoordinate { u: norm(p[0], ux), v: norm(p[1], vx) }).collect())
}

/// Locality exponent field: Parzen density of the basis coordinates mapped
/// linearly from its range over the basis points onto `[3,6]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Locality {
    coords: Vec<LatentCoordinate>,
    low: f64,
    high: f64,
}

impl Locality {
    pub fn new(coords: &[LatentCoordinate]) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument("locality needs at least one basis point"));
        }
        let mut loc = Self { coords: coords.to_vec(), low: 0.0, high: 0.0 };
        let densities: Vec<f64> = coords.iter().map(|&z| loc.density(z)).collect();
        loc.low = densities.iter().copied().fold(f64::INFINITY, f64::min);
        loc.high = densities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(loc.high > loc.low) {
            loc.low = 0.0;
        }
        Ok(loc)
    }

    /// Unnormalized Gaussian Parzen estimate with window [`PARZEN_WINDOW`].
    pub fn density(&self, z: LatentCoordinate) -> f64 {
        let inv = 1.0 / (2.0 * PARZEN_WINDOW * PARZEN_WINDOW);
        self.coords
            .iter()
            .map(|c| {
                let du = z.u - c.u;
                let dv = z.v - c.v;
                libm::exp(-(du * du + dv * dv) * inv)
            })
            .sum()
    }

    pub fn exponent(&self, z: LatentCoordinate) -> f64 {
        let (lo, hi) = LOCALITY_RANGE;
        let t = (self.density(z) - self.low) / (self.high - self.low);
        (lo + (hi - lo) * t).clamp(lo, hi)
    }
}

/// IDW blend of `pcfs` at `z` with exponent `power`. Distances are floored
/// at [`IDW_FLOOR`] before the power is taken, so an exemplar at `z` outweighs
/// any neighbour by at least `(d_min / IDW_FLOOR)^power`.
pub fn idw(z: LatentCoordinate, coords: &[LatentCoordinate], pcfs: &[Pcf], power: f64) -> Pcf {
    let bins = pcfs[0].len();
    let mut acc = vec![0.0; bins];
    let mut total = 0.0;
    for (c, g) in coords.iter().zip(pcfs) {
        let w = 1.0 / libm::pow(z.distance(*c).max(IDW_FLOOR), power);
        total += w;
        for (a, b) in acc.iter_mut().zip(g.bins()) {
            *a += w * b;
        }
    }
    for a in &mut acc {
        *a /= total;
    }
    Pcf::new(acc).expect("convex combination of valid pcfs")
}

/// Index of the descriptor nearest to `target` in L2; ties go to the lowest
/// index.
pub fn nearest_exemplar(target: &FeatureVector, basis: &[FeatureVector]) -> Result<usize> {
    let mut best = (f64::INFINITY, 0);
    for (i, f) in basis.iter().enumerate() {
        let d = feature_l2_distance(target, f)?;
        if d < best.0 {
            best = (d, i);
        }
    }
    if basis.is_empty() {
        return Err(Error::InvalidArgument("no basis descriptors"));
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_points(pts: &[[f64; 2]]) -> SquareMatrix {
        let rows: Vec<Vec<f64>> =
            pts.iter().map(|a| pts.iter().map(|b| libm::hypot(a[0] - b[0], a[1] - b[1])).collect()).collect();
        SquareMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn equilateral_triangle_embeds_exactly() {
        let h = 0.2 * libm::sqrt(3.0) / 2.0;
        let m = from_points(&[[0.0, 0.0], [0.2, 0.0], [0.1, h]]);
        let r = mds_embed(&m, 4).unwrap();
        assert!(r.final_stress <= 1e-4, "{}", r.final_stress);
        assert!(r.final_stress <= r.initial_stress);
    }

    #[test]
    fn rejects_invalid_matrices() {
        let mut m = from_points(&[[0.0, 0.0], [1.0, 0.0]]);
        m.set(0, 1, 0.5);
        assert!(mds_embed(&m, 0).is_err());
        let mut m = from_points(&[[0.0, 0.0], [1.0, 0.0]]);
        m.set(1, 1, -1.0);
        assert!(mds_embed(&m, 0).is_err());
    }

    #[test]
    fn alignment_identity_and_bounds() {
        let coords = [[0.5, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.6]];
        let out = align_and_normalize(&coords, 0).unwrap();
        for (o, c) in out.iter().zip(&coords) {
            assert!((o.u - c[0]).abs() < 1e-9 && (o.v - c[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn alignment_is_rotation_invariant() {
        let coords = [[0.1, 0.3], [0.7, 0.2], [0.4, 0.9], [0.2, 0.5], [0.9, 0.8]];
        let (s, c) = libm::sincos(30f64.to_radians());
        let rotated: Vec<[f64; 2]> = coords.iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect();
        let a = align_and_normalize(&coords, 2).unwrap();
        let b = align_and_normalize(&rotated, 2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(x.distance(*y) < 1e-6);
            assert!((0.0..=1.0).contains(&x.u) && (0.0..=1.0).contains(&x.v));
        }
        assert_eq!(a[2].v, 0.0);
    }

    #[test]
    fn degenerate_alignment_fails() {
        assert_eq!(align_and_normalize(&[[0.3, 0.3]; 4], 1), Err(Error::DegenerateCoordinates));
    }

    #[test]
    fn locality_range() {
        let coords: Vec<LatentCoordinate> = [(0.1, 0.1), (0.105, 0.1), (0.1, 0.104), (0.8, 0.3), (0.5, 0.9)]
            .iter()
            .map(|&(u, v)| LatentCoordinate::new(u, v).unwrap())
            .collect();
        let loc = Locality::new(&coords).unwrap();
        assert_eq!(loc.exponent(LatentCoordinate::new(0.99, 0.01).unwrap()), 3.0);
        let densest = (0..3).max_by(|&a, &b| loc.density(coords[a]).total_cmp(&loc.density(coords[b]))).unwrap();
        assert_eq!(loc.exponent(coords[densest]), 6.0);
        let mut rng = SplitRng::new(2);
        for _ in 0..1000 {
            let p = loc.exponent(LatentCoordinate::new(rng.uniform(), rng.uniform()).unwrap());
            assert!((3.0..=6.0).contains(&p));
        }
    }

    #[test]
    fn idw_midpoint_is_mean() {
        let coords = [LatentCoordinate::new(0.25, 0.5).unwrap(), LatentCoordinate::new(0.75, 0.5).unwrap()];
        let pcfs = [Pcf::new(vec![0.0, 1.0, 2.0]).unwrap(), Pcf::new(vec![1.0, 1.0, 0.0]).unwrap()];
        let mid = idw(LatentCoordinate::new(0.5, 0.5).unwrap(), &coords, &pcfs, 3.0);
        assert_eq!(mid.bins(), &[0.5, 1.0, 1.0]);
        let at = idw(coords[0], &coords, &pcfs, 6.0);
        assert!(at.linf_distance(&pcfs[0]) < 1e-12);
        // a neighbour 0.02 away at the top exponent still leaves the exemplar dominant
        let close = [coords[0], LatentCoordinate::new(0.27, 0.5).unwrap()];
        assert!(idw(close[0], &close, &pcfs[..2], 6.0).linf_distance(&pcfs[0]) < 1e-12);
    }
}
