//! Edge-aware (bilateral) pair correlation estimation.
//!
//! The estimate at query `x` and radius `r` soft-counts the neighbours of `x`
//! with a Gaussian in the scaled distance `‖p_i − x‖/d(x)`, weights each by a
//! guidance similarity, and divides by the same weighting integrated over an
//! intensity-weighted grid clipped to the unit square. The division corrects
//! for the domain boundary and for guide regions that do not match.
//!
//! `d` is a local length scale: `d ≡ 1` is the spacing of a pattern of
//! `reference_count` points on the unit square, and the expected point
//! intensity at `y` is `reference_count / d(y)²`. Under that convention a
//! Poisson pattern of matching intensity reads ≈ 1 in every bin, and the same
//! pattern at a different scale (with `d` scaled along) reads the same.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::field::{GuidanceField, ScalarField};
use crate::knn::NeighborGrid;
use crate::par;
use crate::pattern::{Point, PointPattern};

/// Gaussian support used for spatial terms, in standard deviations. Omitted
/// mass is below `exp(−32)` relative to the peak.
pub const SUPPORT_SIGMAS: f64 = 8.0;

/// Radial histogram over the radius grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Pcf {
    bins: Vec<f64>,
}

impl Pcf {
    pub fn new(bins: Vec<f64>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::InvalidArgument("pcf needs at least one bin"));
        }
        if bins.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::InvalidArgument("pcf bins must be finite and non-negative"));
        }
        Ok(Self { bins })
    }

    pub fn constant(value: f64, bin_count: usize) -> Self {
        Self { bins: vec![value; bin_count] }
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn l2_distance(&self, other: &Pcf) -> f64 {
        libm::sqrt(self.bins.iter().zip(&other.bins).map(|(a, b)| (a - b) * (a - b)).sum())
    }

    pub fn linf_distance(&self, other: &Pcf) -> f64 {
        self.bins.iter().zip(&other.bins).map(|(a, b)| libm::fabs(a - b)).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuidanceKind {
    /// `|gaᵀ Σ gb|` with `Σ = bandwidth · I`.
    InnerProduct,
    /// `exp(−‖ga − gb‖² / (2 · bandwidth))`.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcfConfig {
    pub bin_count: usize,
    /// Spatial bandwidth in units of the radius-grid spacing.
    pub sigma: f64,
    pub k_nearest: usize,
    pub guide_bandwidth: f64,
    pub guidance: GuidanceKind,
    /// Radial and angular cell count of the normalization grid.
    pub norm_grid_resolution: usize,
    pub r_min_factor: f64,
    pub r_max_factor: f64,
    /// Point count at which `d ≡ 1`; fixes the radius grid.
    pub reference_count: usize,
    /// Lower bound applied to `d` before dividing by it.
    pub density_floor: f64,
}

impl Default for PcfConfig {
    fn default() -> Self {
        Self {
            bin_count: 20,
            sigma: 0.26,
            k_nearest: 50,
            guide_bandwidth: 0.005,
            guidance: GuidanceKind::InnerProduct,
            norm_grid_resolution: 64,
            r_min_factor: 0.1,
            r_max_factor: 2.0,
            reference_count: 1024,
            density_floor: 1e-3,
        }
    }
}

impl PcfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bin_count < 2 {
            return Err(Error::InvalidArgument("bin_count must be at least 2"));
        }
        if !(self.sigma > 0.0) || !(self.guide_bandwidth > 0.0) || !(self.density_floor > 0.0) {
            return Err(Error::InvalidArgument("bandwidths and floors must be positive"));
        }
        if self.k_nearest == 0 || self.norm_grid_resolution == 0 || self.reference_count == 0 {
            return Err(Error::InvalidArgument("counts must be positive"));
        }
        if !(self.r_min_factor >= 0.0 && self.r_max_factor > self.r_min_factor) {
            return Err(Error::InvalidArgument("radius range must be increasing"));
        }
        Ok(())
    }

    pub fn radii(&self) -> Vec<f64> {
        radius_grid(self.reference_count, self).expect("reference_count is positive")
    }

    /// Spatial standard deviation in radius units.
    pub fn sigma_r(&self) -> f64 {
        let rm = r_max(self.reference_count).expect("reference_count is positive");
        self.sigma * (self.r_max_factor - self.r_min_factor) * rm / (self.bin_count - 1) as f64
    }
}

/// Maximal radius of a hexagonal packing of `n` points on the unit square,
/// doubled.
pub fn r_max(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1"));
    }
    Ok(2.0 * libm::sqrt(1.0 / (2.0 * libm::sqrt(3.0) * n as f64)))
}

/// `bin_count` equally spaced radii over `[r_min_factor, r_max_factor]·r_max(n)`.
pub fn radius_grid(n: usize, cfg: &PcfConfig) -> Result<Vec<f64>> {
    let rm = r_max(n)?;
    let lo = cfg.r_min_factor * rm;
    let hi = cfg.r_max_factor * rm;
    let m = cfg.bin_count;
    if m == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (m - 1) as f64;
    Ok((0..m).map(|j| if j + 1 == m { hi } else { lo + step * j as f64 }).collect())
}

pub fn gaussian(t: f64, mean: f64, std: f64) -> f64 {
    let z = (t - mean) / std;
    libm::exp(-0.5 * z * z) / (std * libm::sqrt(TAU))
}

fn raw_guidance(ga: &[f64], gb: &[f64], kind: GuidanceKind, bandwidth: f64) -> f64 {
    match kind {
        GuidanceKind::InnerProduct => {
            let dot: f64 = ga.iter().zip(gb).map(|(a, b)| a * b).sum();
            libm::fabs(bandwidth * dot)
        }
        GuidanceKind::Gaussian => {
            let sq: f64 = ga.iter().zip(gb).map(|(a, b)| (a - b) * (a - b)).sum();
            libm::exp(-sq / (2.0 * bandwidth))
        }
    }
}

/// Pair similarity of two guide vectors.
pub fn guidance_weight(ga: &[f64], gb: &[f64], cfg: &PcfConfig) -> Result<f64> {
    if ga.len() != gb.len() {
        return Err(Error::DimensionMismatch { expected: ga.len(), actual: gb.len() });
    }
    Ok(raw_guidance(ga, gb, cfg.guidance, cfg.guide_bandwidth))
}

/// Gaussian of the scaled distance `‖pi − p‖/d(p)` around radius `r`.
pub fn spatial_weight(pi: Point, p: Point, r: f64, d: &ScalarField, cfg: &PcfConfig) -> f64 {
    let scale = d.sample(p).max(cfg.density_floor);
    gaussian(pi.distance(p) / scale, r, cfg.sigma_r())
}

/// Denominators for a fixed set of queries, one row of `bin_count` per query.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationTable {
    queries: Vec<Point>,
    bin_count: usize,
    values: Vec<f64>,
}

impl NormalizationTable {
    pub fn queries(&self) -> &[Point] {
        &self.queries
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    pub fn get(&self, query: usize, bin: usize) -> f64 {
        self.values[query * self.bin_count + bin]
    }

    pub fn row(&self, query: usize) -> &[f64] {
        &self.values[query * self.bin_count..(query + 1) * self.bin_count]
    }
}

/// The estimator bound to one density field and one guidance field.
#[derive(Debug, Clone)]
pub struct EdgeAwarePcf<'a> {
    cfg: PcfConfig,
    density: &'a ScalarField,
    guide: &'a GuidanceField,
    radii: Vec<f64>,
    sigma_r: f64,
    angles: Vec<(f64, f64)>,
    uniform: bool,
}

impl<'a> EdgeAwarePcf<'a> {
    pub fn new(cfg: &PcfConfig, density: &'a ScalarField, guide: &'a GuidanceField) -> Result<Self> {
        cfg.validate()?;
        let res = cfg.norm_grid_resolution;
        let angles = (0..res)
            .map(|b| {
                let (s, c) = libm::sincos(TAU * (b as f64 + 0.5) / res as f64);
                (c, s)
            })
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            density,
            guide,
            radii: cfg.radii(),
            sigma_r: cfg.sigma_r(),
            angles,
            uniform: density.is_uniform() && guide.is_uniform(),
        })
    }

    pub fn config(&self) -> &PcfConfig {
        &self.cfg
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn sigma_r(&self) -> f64 {
        self.sigma_r
    }

    pub fn length_scale(&self, p: Point) -> f64 {
        self.density.sample(p).max(self.cfg.density_floor)
    }

    pub fn intensity(&self, p: Point) -> f64 {
        let d = self.length_scale(p);
        self.cfg.reference_count as f64 / (d * d)
    }

    pub fn guide_at(&self, p: Point) -> Vec<f64> {
        self.guide.sample(p)
    }

    pub fn guidance(&self, ga: &[f64], gb: &[f64]) -> f64 {
        raw_guidance(ga, gb, self.cfg.guidance, self.cfg.guide_bandwidth)
    }

    pub fn spatial(&self, pi: Point, p: Point, bin: usize) -> f64 {
        gaussian(pi.distance(p) / self.length_scale(p), self.radii[bin], self.sigma_r)
    }

    /// Radial band `[lo, hi)` of the normalization grid for one radius.
    fn band(&self, q: Point, bin: usize) -> (f64, f64) {
        let scale = self.length_scale(q);
        let r = self.radii[bin];
        let lo = (r - SUPPORT_SIGMAS * self.sigma_r).max(0.0) * scale;
        let hi = (r + SUPPORT_SIGMAS * self.sigma_r) * scale;
        (lo, hi)
    }

    /// Visits the cells of the polar normalization grid around `q` for one
    /// radius: centre, area and distance to `q`. Cells whose centre leaves the
    /// unit square are skipped.
    fn visit_cells(&self, q: Point, bin: usize, mut visit: impl FnMut(Point, f64, f64)) {
        let (lo, hi) = self.band(q, bin);
        let res = self.cfg.norm_grid_resolution;
        let dr = (hi - lo) / res as f64;
        let dtheta = TAU / res as f64;
        for a in 0..res {
            let rho = lo + (a as f64 + 0.5) * dr;
            let area = rho * dr * dtheta;
            for &(c, s) in &self.angles {
                let y = Point::new(q.x + rho * c, q.y + rho * s);
                if y.in_unit_square() {
                    visit(y, area, rho);
                }
            }
        }
    }

    /// Uniform fields: one Gaussian per ring times the number of ring cells
    /// inside the square.
    fn uniform_denominator(&self, q: Point, bin: usize, interior: bool) -> f64 {
        let scale = self.length_scale(q);
        let r = self.radii[bin];
        let gq = self.guide.sample(q);
        let (lo, hi) = self.band(q, bin);
        let res = self.cfg.norm_grid_resolution;
        let dr = (hi - lo) / res as f64;
        let dtheta = TAU / res as f64;
        let mut sum = 0.0;
        for a in 0..res {
            let rho = lo + (a as f64 + 0.5) * dr;
            let count = if interior {
                res
            } else {
                self.angles.iter().filter(|(c, s)| Point::new(q.x + rho * c, q.y + rho * s).in_unit_square()).count()
            };
            sum += gaussian(rho / scale, r, self.sigma_r) * rho * dr * dtheta * count as f64;
        }
        self.intensity(q) * self.guidance(&gq, &gq) * sum
    }

    /// Grid cells with their intensity mass `λ(y)·area`; the kernel sums to
    /// one against these masses.
    pub fn normalization_cells(&self, q: Point, bin: usize) -> Vec<(Point, f64)> {
        let mut cells = Vec::new();
        self.visit_cells(q, bin, |y, area, _| cells.push((y, self.intensity(y) * area)));
        cells
    }

    pub fn denominator(&self, q: Point, bin: usize) -> f64 {
        if self.uniform {
            return self.uniform_denominator(q, bin, false);
        }
        let scale = self.length_scale(q);
        let r = self.radii[bin];
        let gq = self.guide.sample(q);
        let mut gy = vec![0.0; gq.len()];
        let mut sum = 0.0;
        self.visit_cells(q, bin, |y, area, rho| {
            self.guide.sample_into(y, &mut gy);
            let w = gaussian(rho / scale, r, self.sigma_r) * self.guidance(&gy, &gq);
            sum += self.intensity(y) * w * area;
        });
        sum
    }

    pub fn normalization(&self, queries: &[Point]) -> NormalizationTable {
        let m = self.cfg.bin_count;
        // With uniform fields every query whose whole band lies inside the
        // square has the same row.
        let interior = if self.uniform {
            let centre = Point::new(0.5, 0.5);
            let reach = self.band(centre, m - 1).1;
            let row: Vec<f64> = (0..m).map(|j| self.uniform_denominator(centre, j, true)).collect();
            Some((reach, row))
        } else {
            None
        };
        let rows = par::map_indexed(queries.len(), |q| {
            let p = queries[q];
            if let Some((reach, row)) = &interior {
                let margin = p.x.min(p.y).min(1.0 - p.x).min(1.0 - p.y);
                if margin > reach * (1.0 + 1e-9) {
                    return row.clone();
                }
            }
            (0..m).map(|j| self.denominator(p, j)).collect::<Vec<_>>()
        });
        NormalizationTable { queries: queries.to_vec(), bin_count: m, values: rows.concat() }
    }

    /// Kernel value of point `pi` for query `query` of `table` at one radius.
    pub fn kernel(&self, table: &NormalizationTable, query: usize, pi: Point, bin: usize) -> Result<f64> {
        let denom = table.get(query, bin);
        if !(denom > 0.0) {
            return Err(Error::IsolatedQuery);
        }
        let q = table.queries[query];
        let g = self.guidance(&self.guide.sample(pi), &self.guide.sample(q));
        Ok(self.spatial(pi, q, bin) * g / denom)
    }

    /// Range of bins whose Gaussian reaches scaled distance `t`.
    pub(crate) fn bins_near(&self, t: f64) -> core::ops::Range<usize> {
        self.bins_within(t, self.sigma_r)
    }

    /// Range of bins whose Gaussian of width `sigma` reaches `t`.
    pub(crate) fn bins_within(&self, t: f64, sigma: f64) -> core::ops::Range<usize> {
        let lo = self.radii[0];
        let step = (self.radii[self.radii.len() - 1] - lo) / (self.radii.len() - 1) as f64;
        let reach = SUPPORT_SIGMAS * sigma;
        let first = libm::ceil((t - reach - lo) / step).max(0.0) as usize;
        let last = libm::floor((t + reach - lo) / step);
        if last < 0.0 {
            return 0..0;
        }
        let end = (last as usize + 1).min(self.radii.len());
        first.min(end)..end
    }

    /// Sums the kernel over the `k_nearest` neighbours of one query, skipping
    /// points that coincide with it.
    fn estimate_one(
        &self,
        points: &[Point],
        grid: &NeighborGrid,
        table: &NormalizationTable,
        qi: usize,
    ) -> Result<Pcf> {
        let q = table.queries[qi];
        let denom = table.row(qi);
        if denom.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::IsolatedQuery);
        }
        let scale = self.length_scale(q);
        let gq = self.guide.sample(q);
        let mut gi = vec![0.0; gq.len()];
        let g_uniform = self.guide.is_uniform();
        let g_self = self.guidance(&gq, &gq);
        let neighbors = grid.k_nearest_filtered(points, q, self.cfg.k_nearest, |i| points[i] != q);
        let mut bins = vec![0.0; self.cfg.bin_count];
        for i in neighbors {
            let t = points[i].distance(q) / scale;
            let g = if g_uniform {
                g_self
            } else {
                self.guide.sample_into(points[i], &mut gi);
                self.guidance(&gi, &gq)
            };
            for j in self.bins_near(t) {
                bins[j] += gaussian(t, self.radii[j], self.sigma_r) * g;
            }
        }
        for (b, d) in bins.iter_mut().zip(denom) {
            *b /= d;
        }
        Pcf::new(bins)
    }

    pub fn estimate(&self, pattern: &PointPattern, table: &NormalizationTable) -> Result<Vec<Pcf>> {
        if pattern.is_empty() {
            return Err(Error::EmptyPattern);
        }
        let points = pattern.points();
        let grid = NeighborGrid::new(points);
        par::map_indexed(table.len(), |q| self.estimate_one(points, &grid, table, q)).into_iter().collect()
    }
}

/// Per-query edge-aware PCFs of `pattern`.
pub fn estimate_pcf(
    pattern: &PointPattern,
    density: &ScalarField,
    guide: &GuidanceField,
    queries: &[Point],
    cfg: &PcfConfig,
) -> Result<Vec<Pcf>> {
    let est = EdgeAwarePcf::new(cfg, density, guide)?;
    let table = est.normalization(queries);
    est.estimate(pattern, &table)
}

pub fn build_normalization(
    density: &ScalarField,
    guide: &GuidanceField,
    queries: &[Point],
    cfg: &PcfConfig,
) -> Result<NormalizationTable> {
    Ok(EdgeAwarePcf::new(cfg, density, guide)?.normalization(queries))
}

/// Length scale that puts `n` uniformly spread points at the reference spacing.
pub fn uniform_length_scale(n: usize, cfg: &PcfConfig) -> f64 {
    libm::sqrt(cfg.reference_count as f64 / n.max(1) as f64)
}

/// Mean PCF of a whole pattern under a uniform density matching its point
/// count and uniform guidance, with every point used as a query.
pub fn pattern_pcf(pattern: &PointPattern, cfg: &PcfConfig) -> Result<Pcf> {
    if pattern.is_empty() {
        return Err(Error::EmptyPattern);
    }
    let density = ScalarField::uniform(uniform_length_scale(pattern.len(), cfg));
    let guide = GuidanceField::uniform(&[1.0]);
    let per_point = estimate_pcf(pattern, &density, &guide, pattern.points(), cfg)?;
    let mut mean = vec![0.0; cfg.bin_count];
    for pcf in &per_point {
        for (m, b) in mean.iter_mut().zip(pcf.bins()) {
            *m += b;
        }
    }
    for m in &mut mean {
        *m /= per_point.len() as f64;
    }
    Pcf::new(mean)
}

/// Canonical blue-noise PCF: 0 below `0.8·r_max`, 1 from there on. A radius
/// within rounding of the step counts as past it.
pub fn step_pcf(cfg: &PcfConfig) -> Pcf {
    let edge = 0.8 * r_max(cfg.reference_count).expect("reference_count is positive") * (1.0 - 1e-9);
    Pcf { bins: cfg.radii().iter().map(|&r| if r < edge { 0.0 } else { 1.0 }).collect() }
}
