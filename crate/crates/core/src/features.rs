//! Perceptual texture descriptor of a point pattern.
//!
//! Each pattern is splatted at three Gaussian sizes onto a 256² torus; each
//! raster passes through a seeded two-stage convolutional filter bank
//! (3×3 kernels, rectifier, stride-4 average pooling) and the channel Gram
//! matrices of both stages are concatenated.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::par;
use crate::pattern::PointPattern;
use crate::rng::SplitRng;

pub const SPLAT_SIGMAS: [f64; 3] = [0.015, 0.01, 0.005];
pub const RASTER_RESOLUTION: usize = 256;
pub const STAGE1_CHANNELS: usize = 64;
pub const STAGE2_CHANNELS: usize = 128;
pub const POOL: usize = 4;
pub const FEATURE_LEN: usize =
    SPLAT_SIGMAS.len() * (STAGE1_CHANNELS * STAGE1_CHANNELS + STAGE2_CHANNELS * STAGE2_CHANNELS);
pub const DEFAULT_FEATURE_SEED: u64 = 0x5eed_f11e;

/// Splats are cut off at this many standard deviations.
const SPLAT_REACH: f64 = 5.0;

/// Gaussian splat raster, row-major, pixel centres at `(i + 0.5)/res`. Each
/// splat has peak 1, overlaps add, the sum is clamped to `[0,1]`. The domain
/// wraps around.
pub fn splat(pattern: &PointPattern, sigma: f64, resolution: usize) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument("sigma must be positive"));
    }
    if resolution < 32 {
        return Err(Error::InvalidArgument("resolution must be at least 32"));
    }
    let res = resolution as isize;
    let mut grid = vec![0.0; resolution * resolution];
    let reach = libm::ceil(SPLAT_REACH * sigma * resolution as f64) as isize;
    let width = (2 * reach + 1) as usize;
    let mut wx = vec![0.0; width];
    let mut wy = vec![0.0; width];
    let inv = 1.0 / (2.0 * sigma * sigma);
    for p in pattern.points() {
        let cx = libm::floor(p.x * resolution as f64) as isize;
        let cy = libm::floor(p.y * resolution as f64) as isize;
        for t in 0..width {
            let off = t as isize - reach;
            let dx = ((cx + off) as f64 + 0.5) / resolution as f64 - p.x;
            let dy = ((cy + off) as f64 + 0.5) / resolution as f64 - p.y;
            wx[t] = libm::exp(-dx * dx * inv);
            wy[t] = libm::exp(-dy * dy * inv);
        }
        for (ty, &a) in wy.iter().enumerate() {
            let row = (cy + ty as isize - reach).rem_euclid(res) as usize;
            let line = &mut grid[row * resolution..(row + 1) * resolution];
            for (tx, &b) in wx.iter().enumerate() {
                let col = (cx + tx as isize - reach).rem_euclid(res) as usize;
                line[col] += a * b;
            }
        }
    }
    for v in &mut grid {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(grid)
}

/// Seeded random 3×3 convolution kernels, each scaled to unit L2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    seed: u64,
    /// `[out][tap]`, 64 × 9
    stage1: Vec<f32>,
    /// `[out][in][tap]`, 128 × 64 × 9
    stage2: Vec<f32>,
}

fn normalized_kernels(rng: &mut SplitRng, count: usize, len: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(count * len);
    for _ in 0..count {
        let k: Vec<f64> = (0..len).map(|_| rng.normal()).collect();
        let norm = libm::sqrt(k.iter().map(|v| v * v).sum());
        out.extend(k.iter().map(|v| (v / norm) as f32));
    }
    out
}

impl FilterBank {
    pub fn new(seed: u64) -> Self {
        let stage1 = normalized_kernels(&mut SplitRng::stream(seed, 0), STAGE1_CHANNELS, 9);
        let stage2 = normalized_kernels(&mut SplitRng::stream(seed, 1), STAGE2_CHANNELS, STAGE1_CHANNELS * 9);
        Self { seed, stage1, stage2 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stage1(&self) -> &[f32] {
        &self.stage1
    }

    pub fn stage2(&self) -> &[f32] {
        &self.stage2
    }
}

/// Gram-statistics descriptor, tagged with the seed of the bank that made it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    seed: u64,
    values: Vec<f32>,
}

impl FeatureVector {
    pub fn new(seed: u64, values: Vec<f32>) -> Result<Self> {
        if values.len() != FEATURE_LEN {
            return Err(Error::DimensionMismatch { expected: FEATURE_LEN, actual: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("feature values must be finite"));
        }
        Ok(Self { seed, values })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Circular 3×3 shifts of a square image: tap `t = 3·dy + dx` holds
/// `img[(y + dy − 1) mod n][(x + dx − 1) mod n]`.
fn shifted_taps(img: &[f32], n: usize) -> Vec<Vec<f32>> {
    let mut taps = Vec::with_capacity(9);
    for dy in 0..3 {
        for dx in 0..3 {
            let mut s = vec![0.0f32; n * n];
            for y in 0..n {
                let sy = (y + n + dy - 1) % n;
                for x in 0..n {
                    let sx = (x + n + dx - 1) % n;
                    s[y * n + x] = img[sy * n + sx];
                }
            }
            taps.push(s);
        }
    }
    taps
}

fn avg_pool(map: &[f32], n: usize) -> Vec<f32> {
    let m = n / POOL;
    let mut out = vec![0.0f32; m * m];
    let scale = 1.0 / (POOL * POOL) as f32;
    for y in 0..n {
        let row = &map[y * n..(y + 1) * n];
        let dst = &mut out[(y / POOL) * m..(y / POOL + 1) * m];
        for (x, v) in row.iter().enumerate() {
            dst[x / POOL] += v;
        }
    }
    for v in &mut out {
        *v *= scale;
    }
    out
}

fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        for l in 0..8 {
            acc[l] += a[8 * c + l] * b[8 * c + l];
        }
    }
    let mut total = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for i in 8 * chunks..a.len() {
        total += a[i] * b[i];
    }
    total
}

/// Channel Gram matrix of `maps` (`channels × pixels`), divided by the pixel
/// count, appended to `out` row by row.
fn gram_into(maps: &[Vec<f32>], out: &mut Vec<f32>) {
    let c = maps.len();
    let pixels = maps[0].len() as f32;
    let start = out.len();
    out.resize(start + c * c, 0.0);
    for a in 0..c {
        for b in a..c {
            let g = dot_f32(&maps[a], &maps[b]) / pixels;
            out[start + a * c + b] = g;
            out[start + b * c + a] = g;
        }
    }
}

impl FilterBank {
    /// Stage-1 and stage-2 Gram matrices of one raster.
    fn grams(&self, raster: &[f64], n: usize, out: &mut Vec<f32>) {
        let img: Vec<f32> = raster.iter().map(|&v| v as f32).collect();
        let taps = shifted_taps(&img, n);
        let m = n / POOL;
        let mut conv = vec![0.0f32; n * n];
        let mut pooled1 = Vec::with_capacity(STAGE1_CHANNELS);
        for ch in 0..STAGE1_CHANNELS {
            let k = &self.stage1[ch * 9..ch * 9 + 9];
            conv.iter_mut().for_each(|v| *v = 0.0);
            for (t, tap) in taps.iter().enumerate() {
                let w = k[t];
                for (o, s) in conv.iter_mut().zip(tap) {
                    *o += w * s;
                }
            }
            conv.iter_mut().for_each(|v| *v = v.max(0.0));
            pooled1.push(avg_pool(&conv, n));
        }
        gram_into(&pooled1, out);

        let q = m / POOL;
        let pooled2: Vec<Vec<f32>> = pooled1.iter().map(|map| avg_pool(map, m)).collect();
        let cols: Vec<Vec<Vec<f32>>> = pooled2.iter().map(|map| shifted_taps(map, q)).collect();
        let mut act = Vec::with_capacity(STAGE2_CHANNELS);
        for oc in 0..STAGE2_CHANNELS {
            let kernel = &self.stage2[oc * STAGE1_CHANNELS * 9..(oc + 1) * STAGE1_CHANNELS * 9];
            let mut o = vec![0.0f32; q * q];
            for (ic, taps) in cols.iter().enumerate() {
                for (t, tap) in taps.iter().enumerate() {
                    let w = kernel[ic * 9 + t];
                    for (dst, s) in o.iter_mut().zip(tap) {
                        *dst += w * s;
                    }
                }
            }
            o.iter_mut().for_each(|v| *v = v.max(0.0));
            act.push(o);
        }
        gram_into(&act, out);
    }

    /// Descriptor of `pattern`: `[G1, G2]` for each splat size in
    /// [`SPLAT_SIGMAS`] order.
    pub fn feature_stats(&self, pattern: &PointPattern) -> FeatureVector {
        let mut values = Vec::with_capacity(FEATURE_LEN);
        for &sigma in &SPLAT_SIGMAS {
            let raster = splat(pattern, sigma, RASTER_RESOLUTION).expect("constants are valid");
            self.grams(&raster, RASTER_RESOLUTION, &mut values);
        }
        FeatureVector { seed: self.seed, values }
    }
}

fn check_pair(a: &FeatureVector, b: &FeatureVector) -> Result<()> {
    if a.values.len() != b.values.len() {
        return Err(Error::DimensionMismatch { expected: a.values.len(), actual: b.values.len() });
    }
    if a.seed != b.seed {
        return Err(Error::ExtractorMismatch);
    }
    Ok(())
}

/// L1 distance, accumulated in `f64` in index order.
pub fn perceptual_distance(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    check_pair(a, b)?;
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| libm::fabs(*x as f64 - *y as f64)).sum())
}

/// L2 distance, used for nearest-exemplar lookup.
pub fn feature_l2_distance(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    check_pair(a, b)?;
    let sq: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum();
    Ok(libm::sqrt(sq))
}

/// Pairwise perceptual distances of precomputed descriptors.
pub fn distance_matrix(features: &[FeatureVector]) -> Result<SquareMatrix> {
    let n = features.len();
    if n == 0 {
        return Err(Error::InvalidArgument("corpus must not be empty"));
    }
    let rows = par::map_indexed(n, |i| {
        (i + 1..n).map(|j| perceptual_distance(&features[i], &features[j])).collect::<Result<Vec<f64>>>()
    });
    let mut m = SquareMatrix::zeros(n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, d) in row?.into_iter().enumerate() {
            m.set(i, i + 1 + off, d);
            m.set(i + 1 + off, i, d);
        }
    }
    Ok(m)
}

pub fn dissimilarity_matrix(corpus: &[PointPattern], bank: &FilterBank) -> Result<SquareMatrix> {
    let features = par::map_indexed(corpus.len(), |i| bank.feature_stats(&corpus[i]));
    distance_matrix(&features)
}
