//! Inverse path: density and correlation maps from an existing pattern.

use alloc::vec;
use alloc::vec::Vec;

use crate::embedding::LatentCoordinate;
use crate::error::{Error, Result};
use crate::features::FilterBank;
use crate::field::{pixel_index, ScalarField};
use crate::image::FeatureImage;
use crate::palette::Palette;
use crate::par;
use crate::pattern::{Point, PointPattern};

pub const DEFAULT_WINDOW: f64 = 0.25;
pub const MIN_WINDOW_POINTS: usize = 64;
pub const DEFAULT_BANDWIDTH: f64 = 0.05;

/// Normalized 1D Gaussian taps out to 4σ.
fn gaussian_taps(sigma_px: f64) -> Vec<f64> {
    let reach = libm::ceil(4.0 * sigma_px).max(1.0) as usize;
    (0..=2 * reach)
        .map(|t| {
            let z = (t as f64 - reach as f64) / sigma_px;
            libm::exp(-0.5 * z * z)
        })
        .collect()
}

/// Zero-padded separable convolution of a square grid.
fn convolve(grid: &[f64], n: usize, taps: &[f64]) -> Vec<f64> {
    let reach = (taps.len() / 2) as isize;
    let mut tmp = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            let mut acc = 0.0;
            for (t, w) in taps.iter().enumerate() {
                let sx = x as isize + t as isize - reach;
                if sx >= 0 && (sx as usize) < n {
                    acc += w * grid[y * n + sx as usize];
                }
            }
            tmp[y * n + x] = acc;
        }
    }
    let mut out = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            let mut acc = 0.0;
            for (t, w) in taps.iter().enumerate() {
                let sy = y as isize + t as isize - reach;
                if sy >= 0 && (sy as usize) < n {
                    acc += w * tmp[sy as usize * n + x];
                }
            }
            out[y * n + x] = acc;
        }
    }
    out
}

/// Ink density `ρ` by Gaussian KDE with boundary correction (each pixel is
/// divided by the kernel mass inside the domain), scaled so its mean is
/// `N / budget`.
pub fn estimate_ink(pattern: &PointPattern, resolution: usize, bandwidth: f64, budget: f64) -> Result<ScalarField> {
    if pattern.is_empty() {
        return Err(Error::EmptyPattern);
    }
    if resolution == 0 || !(bandwidth > 0.0) || !(budget > 0.0) {
        return Err(Error::InvalidArgument("resolution, bandwidth and budget must be positive"));
    }
    let n = resolution;
    let mut counts = vec![0.0; n * n];
    for p in pattern.points() {
        counts[pixel_index(p.y, n) * n + pixel_index(p.x, n)] += 1.0;
    }
    let taps = gaussian_taps(bandwidth * n as f64);
    let smooth = convolve(&counts, n, &taps);
    let mass = convolve(&vec![1.0; n * n], n, &taps);
    let raw: Vec<f64> = smooth.iter().zip(&mass).map(|(s, m)| s / m).collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let scale = pattern.len() as f64 / budget / mean;
    ScalarField::new(n, n, raw.into_iter().map(|v| v * scale).collect())
}

/// Lightness map `100·(1 − ρ)` clamped to `[0,100]`.
pub fn estimate_density(pattern: &PointPattern, resolution: usize, bandwidth: f64, budget: f64) -> Result<ScalarField> {
    let ink = estimate_ink(pattern, resolution, bandwidth, budget)?;
    let l = ink.data().iter().map(|r| (100.0 * (1.0 - r)).clamp(0.0, 100.0)).collect();
    ScalarField::new(resolution, resolution, l)
}

/// Latent coordinates on a grid of windows, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    pub cols: usize,
    pub rows: usize,
    pub coords: Vec<LatentCoordinate>,
    /// Whether each window held enough points to be decoded itself.
    pub valid: Vec<bool>,
}

impl CorrelationMap {
    pub fn at(&self, p: Point) -> LatentCoordinate {
        self.coords[pixel_index(p.y, self.rows) * self.cols + pixel_index(p.x, self.cols)]
    }

    /// Componentwise median of the valid window estimates.
    pub fn median(&self) -> LatentCoordinate {
        let mut u: Vec<f64> = self.coords.iter().map(|c| c.u).collect();
        let mut v: Vec<f64> = self.coords.iter().map(|c| c.v).collect();
        LatentCoordinate { u: median(&mut u), v: median(&mut v) }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Points of a window, rescaled so that their density matches
/// `reference_count` points per unit area, and repeated periodically to cover
/// the unit square.
pub fn window_pattern(points: &[Point], origin: Point, side: f64, reference_count: usize) -> Result<PointPattern> {
    let local: Vec<Point> = points
        .iter()
        .filter(|p| p.x >= origin.x && p.x < origin.x + side && p.y >= origin.y && p.y < origin.y + side)
        .map(|p| Point::new((p.x - origin.x) / side, (p.y - origin.y) / side))
        .collect();
    if local.is_empty() {
        return Ok(PointPattern::empty());
    }
    let period = libm::sqrt(local.len() as f64 / reference_count as f64);
    let copies = libm::ceil(1.0 / period) as usize;
    let mut out = Vec::new();
    for b in 0..copies {
        for a in 0..copies {
            for p in &local {
                let q = Point::new((a as f64 + p.x) * period, (b as f64 + p.y) * period);
                if q.x < 1.0 && q.y < 1.0 {
                    out.push(q);
                }
            }
        }
    }
    PointPattern::new(out)
}

/// Windowed nearest-exemplar decoding. Windows of side `window` sit at
/// `stride`-pixel steps of a `resolution` grid (shifted inward at the
/// border); windows with fewer than 64 points copy the nearest decoded
/// window; each channel is then 3×3 median filtered.
pub fn estimate_correlation_map(
    pattern: &PointPattern,
    palette: &Palette,
    bank: &FilterBank,
    resolution: usize,
    window: f64,
    stride: usize,
) -> Result<CorrelationMap> {
    if stride == 0 || resolution < stride || !(window > 0.0 && window <= 1.0) {
        return Err(Error::InvalidArgument("invalid window geometry"));
    }
    if bank.seed() != palette.feature_seed() {
        return Err(Error::ExtractorMismatch);
    }
    let cols = resolution / stride;
    let rows = cols;
    let points = pattern.points();
    let reference = palette_reference_count();
    let decoded = par::map_indexed(cols * rows, |k| -> Result<Option<LatentCoordinate>> {
        let (i, j) = (k % cols, k / cols);
        let centre =
            |c: usize| ((c as f64 + 0.5) * stride as f64 / resolution as f64 - window / 2.0).clamp(0.0, 1.0 - window);
        let origin = Point::new(centre(i), centre(j));
        let inside = points
            .iter()
            .filter(|p| p.x >= origin.x && p.x < origin.x + window && p.y >= origin.y && p.y < origin.y + window)
            .count();
        if inside < MIN_WINDOW_POINTS {
            return Ok(None);
        }
        let local = window_pattern(points, origin, window, reference)?;
        Ok(Some(palette.decode_features(&bank.feature_stats(&local))?))
    });
    let decoded: Vec<Option<LatentCoordinate>> = decoded.into_iter().collect::<Result<_>>()?;
    let valid: Vec<bool> = decoded.iter().map(Option::is_some).collect();
    if !valid.iter().any(|v| *v) {
        return Err(Error::TooSparse);
    }
    let filled: Vec<LatentCoordinate> = (0..cols * rows)
        .map(|k| {
            decoded[k].unwrap_or_else(|| {
                let (i, j) = ((k % cols) as isize, (k / cols) as isize);
                let mut best = (isize::MAX, 0);
                for (m, d) in decoded.iter().enumerate() {
                    if d.is_some() {
                        let (a, b) = ((m % cols) as isize, (m / cols) as isize);
                        let dist = (a - i) * (a - i) + (b - j) * (b - j);
                        if dist < best.0 {
                            best = (dist, m);
                        }
                    }
                }
                decoded[best.1].expect("index of a valid window")
            })
        })
        .collect();
    let coords = median_filter(&filled, cols, rows);
    Ok(CorrelationMap { cols, rows, coords, valid })
}

fn palette_reference_count() -> usize {
    crate::pcf::PcfConfig::default().reference_count
}

/// 3×3 median per channel; border windows use the neighbours that exist.
fn median_filter(grid: &[LatentCoordinate], cols: usize, rows: usize) -> Vec<LatentCoordinate> {
    let mut out = Vec::with_capacity(grid.len());
    for j in 0..rows {
        for i in 0..cols {
            let mut u = Vec::with_capacity(9);
            let mut v = Vec::with_capacity(9);
            for b in j.saturating_sub(1)..(j + 2).min(rows) {
                for a in i.saturating_sub(1)..(i + 2).min(cols) {
                    u.push(grid[b * cols + a].u);
                    v.push(grid[b * cols + a].v);
                }
            }
            out.push(LatentCoordinate { u: median(&mut u), v: median(&mut v) });
        }
    }
    out
}

/// Complete feature image of a pattern: KDE lightness plus the windowed
/// correlation map upsampled by nearest window.
/// Settings of [`estimate_feature_image`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    pub resolution: usize,
    /// KDE bandwidth in domain units.
    pub bandwidth: f64,
    pub budget: f64,
    /// Window side in domain units.
    pub window: f64,
    /// Window step in output pixels.
    pub stride: usize,
}

impl EstimateOptions {
    /// Defaults for a given output resolution: stride is `resolution / 16`.
    pub fn with_resolution(resolution: usize) -> Self {
        Self {
            resolution,
            bandwidth: DEFAULT_BANDWIDTH,
            budget: crate::synth::POINT_BUDGET,
            window: DEFAULT_WINDOW,
            stride: (resolution / 16).max(1),
        }
    }
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self::with_resolution(256)
    }
}

pub fn estimate_feature_image(
    pattern: &PointPattern,
    palette: &Palette,
    bank: &FilterBank,
    opts: &EstimateOptions,
) -> Result<(FeatureImage, CorrelationMap)> {
    let resolution = opts.resolution;
    let l = estimate_density(pattern, resolution, opts.bandwidth, opts.budget)?;
    let map = estimate_correlation_map(pattern, palette, bank, resolution, opts.window, opts.stride)?;
    let mut u = Vec::with_capacity(resolution * resolution);
    let mut v = Vec::with_capacity(resolution * resolution);
    for row in 0..resolution {
        for col in 0..resolution {
            let p = Point::new((col as f64 + 0.5) / resolution as f64, (row as f64 + 0.5) / resolution as f64);
            let z = map.at(p);
            u.push(z.u);
            v.push(z.v);
        }
    }
    let img = FeatureImage::new(resolution, resolution, l.data().to_vec(), u, v)?;
    Ok((img, map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitRng;

    fn uniform(n: usize, seed: u64, x_max: f64) -> PointPattern {
        let mut rng = SplitRng::new(seed);
        PointPattern::new((0..n).map(|_| Point::new(rng.uniform() * x_max, rng.uniform())).collect()).unwrap()
    }

    #[test]
    fn uniform_kde_is_flat() {
        let ink = estimate_ink(&uniform(4096, 1, 1.0), 64, 0.05, 50_000.0).unwrap();
        let mean = ink.mean();
        let var = ink.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / ink.data().len() as f64;
        assert!(libm::sqrt(var) / mean <= 0.2);
        assert!((mean - 4096.0 / 50_000.0).abs() < 1e-12);
    }

    #[test]
    fn empty_half_is_white() {
        let l = estimate_density(&uniform(4096, 2, 0.5), 64, 0.05, 50_000.0).unwrap();
        let right: Vec<f64> = (0..64).flat_map(|r| (32..64).map(move |c| (r, c))).map(|(r, c)| l.get(c, r)).collect();
        assert!(right.iter().sum::<f64>() / right.len() as f64 >= 95.0);
        assert!(l.data().iter().all(|v| (0.0..=100.0).contains(v)));
    }

    #[test]
    fn doubling_points_doubles_ink() {
        let p = uniform(1000, 3, 1.0);
        let mut twice = p.points().to_vec();
        twice.extend_from_slice(p.points());
        let a = estimate_ink(&p, 32, 0.05, 50_000.0).unwrap().mean();
        let b = estimate_ink(&PointPattern::new(twice).unwrap(), 32, 0.05, 50_000.0).unwrap().mean();
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn empty_pattern_is_an_error() {
        assert_eq!(estimate_density(&PointPattern::empty(), 16, 0.05, 1.0), Err(Error::EmptyPattern));
    }

    #[test]
    fn window_tiling_matches_reference_density() {
        let p = uniform(4096, 4, 1.0);
        let local = window_pattern(p.points(), Point::new(0.25, 0.25), 0.25, 1024).unwrap();
        assert!((local.len() as f64 - 1024.0).abs() < 150.0);
        assert!(local.points().iter().all(|q| q.in_unit_square()));
    }

    #[test]
    fn median_of_even_count_averages() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0, 10.0]), 2.5);
    }
}
