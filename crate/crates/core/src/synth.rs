//! Point synthesis against density and correlation maps.
//!
//! The objective compares local PCFs at a fixed set of jittered spatial
//! samples with the target PCF field. A PCF at a location that is not a
//! point only measures density, so the local PCF at a sample is the mean of
//! the PCFs of its *anchors*, the points nearest to it. Each anchor is a
//! query whose k nearest neighbours are soft-counted with the Gaussian scaled
//! by its own length scale and normalized by its own denominators, read from
//! a lattice precomputed once. Anchor sets, neighbour lists, scales and
//! denominators are refreshed periodically and held fixed in between.
//!
//! The radial kernel starts wider than configured, with targets smoothed to
//! match, and narrows to its configured width over the first part of the run:
//! with narrow kernels, pair distances between bins get no gradient at all.

use alloc::vec;
use alloc::vec::Vec;

use crate::adam::{Adam, AdamParams};
use crate::error::{Error, Result};
use crate::field::{GuidanceField, ScalarField};
use crate::image::FeatureImage;
use crate::knn::NeighborGrid;
use crate::palette::Palette;
use crate::par;
use crate::pattern::{Point, PointPattern};
use crate::pcf::{gaussian, uniform_length_scale, EdgeAwarePcf, GuidanceKind, NormalizationTable, Pcf, PcfConfig};
use crate::rng::SplitRng;

pub const DEFAULT_ITERATIONS: usize = 5000;
pub const POINT_BUDGET: f64 = 50_000.0;
pub const SAMPLES_PER_AXIS: usize = 10;
pub const REFRESH_INTERVAL: usize = 50;
pub const BANDWIDTH_START: f64 = 4.0;
pub const ANNEAL_FRACTION: f64 = 0.5;
pub const ANCHOR_OVERLAP: f64 = 8.0;
pub const LATTICE_RESOLUTION: usize = 32;
/// Lower bound on ink density when converting it to a length scale.
pub const INK_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    pub iterations: usize,
    /// Jittered samples per axis; the sample count is its square.
    pub samples_per_axis: usize,
    pub point_budget: f64,
    pub seed: u64,
    pub adam: AdamParams,
    pub refresh_interval: usize,
    /// Initial radial kernel width as a multiple of the configured one.
    pub bandwidth_start: f64,
    /// Share of the iterations spent narrowing the kernel.
    pub anneal_fraction: f64,
    /// Anchors per sample relative to the mean points per sample.
    pub anchor_overlap: f64,
    /// Cells per axis of the denominator lattice.
    pub lattice_resolution: usize,
    pub pcf: PcfConfig,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            samples_per_axis: SAMPLES_PER_AXIS,
            point_budget: POINT_BUDGET,
            seed: 0,
            adam: AdamParams::default(),
            refresh_interval: REFRESH_INTERVAL,
            bandwidth_start: BANDWIDTH_START,
            anneal_fraction: ANNEAL_FRACTION,
            anchor_overlap: ANCHOR_OVERLAP,
            lattice_resolution: LATTICE_RESOLUTION,
            pcf: PcfConfig::default(),
        }
    }
}

impl SynthesisConfig {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.samples_per_axis == 0 || self.refresh_interval == 0 {
            return Err(Error::InvalidArgument("iterations, samples and refresh interval must be positive"));
        }
        if !(self.point_budget > 0.0) {
            return Err(Error::InvalidArgument("point budget must be positive"));
        }
        if !(self.anchor_overlap > 0.0) || self.lattice_resolution == 0 {
            return Err(Error::InvalidArgument("anchor overlap and lattice resolution must be positive"));
        }
        if !(self.bandwidth_start >= 1.0) || !(0.0..=1.0).contains(&self.anneal_fraction) {
            return Err(Error::InvalidArgument("bandwidth start must be >= 1 and anneal fraction in [0, 1]"));
        }
        self.pcf.validate()
    }
}

/// `round(C · mean(1 − L/100))`.
pub fn point_count(img: &FeatureImage, budget: f64) -> Result<usize> {
    if !(budget > 0.0) {
        return Err(Error::InvalidArgument("point budget must be positive"));
    }
    Ok(libm::round(budget * img.mean_ink()) as usize)
}

/// Rejection sampling proportional to ink density.
pub fn init_points(img: &FeatureImage, n: usize, seed: u64) -> Result<PointPattern> {
    if n == 0 {
        return Ok(PointPattern::empty());
    }
    let max_ink = img.ink().into_iter().fold(0.0, f64::max);
    if !(max_ink > 0.0) {
        return Err(Error::ZeroDensity);
    }
    let mut rng = SplitRng::new(seed);
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let p = Point::new(rng.uniform(), rng.uniform());
        if rng.uniform() * max_ink < img.ink_at(p) {
            points.push(p);
        }
    }
    PointPattern::new(points)
}

/// One uniform sample in each cell of a `per_axis²` grid.
pub fn jittered_samples(per_axis: usize, seed: u64) -> Vec<Point> {
    let mut rng = SplitRng::new(seed);
    let m = per_axis as f64;
    let mut out = Vec::with_capacity(per_axis * per_axis);
    for b in 0..per_axis {
        for a in 0..per_axis {
            out.push(Point::new((a as f64 + rng.uniform()) / m, (b as f64 + rng.uniform()) / m));
        }
    }
    out
}

/// Length-scale map of an image: `sqrt(n_ref / (C·ρ))` per pixel.
pub fn length_scale_field(img: &FeatureImage, budget: f64, pcf: &PcfConfig) -> ScalarField {
    let data = img
        .ink()
        .into_iter()
        .map(|rho| libm::sqrt(pcf.reference_count as f64 / (budget * rho.max(INK_FLOOR))))
        .collect();
    ScalarField::new(img.width(), img.height(), data).expect("dimensions match the image")
}

/// Target PCF per pixel, looked up in the palette table.
pub fn target_field(img: &FeatureImage, palette: &Palette) -> Result<GuidanceField> {
    let bins = palette.bin_count();
    let mut data = Vec::with_capacity(img.width() * img.height() * bins);
    for (&u, &v) in img.latent_u().iter().zip(img.latent_v()) {
        data.extend(palette.lut_pcf(u, v)?.iter().map(|&x| x as f64));
    }
    GuidanceField::new(img.width(), img.height(), bins, data)
}

/// Anchor sets per sample, neighbour lists per point, and each point's
/// length scale and denominators, all held fixed between refreshes.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods {
    pub anchors: Vec<Vec<usize>>,
    pub neighbors: Vec<Vec<usize>>,
    pub scales: Vec<f64>,
    /// `bin_count` denominators per point.
    pub denominators: Vec<f64>,
}

/// Denominators precomputed on a regular lattice of `(res + 1)²` nodes over
/// the unit square and read back bilinearly.
#[derive(Debug, Clone, PartialEq)]
pub struct DenominatorLattice {
    res: usize,
    table: NormalizationTable,
}

impl DenominatorLattice {
    pub fn new(est: &EdgeAwarePcf, res: usize) -> Self {
        let res = res.max(1);
        let step = 1.0 / res as f64;
        let nodes: Vec<Point> =
            (0..=res).flat_map(|j| (0..=res).map(move |i| Point::new(i as f64 * step, j as f64 * step))).collect();
        Self { res, table: est.normalization(&nodes) }
    }

    pub fn resolution(&self) -> usize {
        self.res
    }

    pub fn table(&self) -> &NormalizationTable {
        &self.table
    }

    /// Bilinear denominators at `p`, written to `out`.
    pub fn at(&self, p: Point, out: &mut [f64]) {
        let n = self.res;
        let (fx, fy) = (p.x.clamp(0.0, 1.0) * n as f64, p.y.clamp(0.0, 1.0) * n as f64);
        let (i, j) = ((libm::floor(fx) as usize).min(n - 1), (libm::floor(fy) as usize).min(n - 1));
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let node = |i: usize, j: usize| self.table.row(j * (n + 1) + i);
        let (a, b, c, d) = (node(i, j), node(i + 1, j), node(i, j + 1), node(i + 1, j + 1));
        for (k, o) in out.iter_mut().enumerate() {
            let lo = a[k] * (1.0 - tx) + b[k] * tx;
            let hi = c[k] * (1.0 - tx) + d[k] * tx;
            *o = lo * (1.0 - ty) + hi * ty;
        }
    }
}

/// Guide value and spatial derivatives at every point.
struct GuideCache {
    dim: usize,
    value: Vec<f64>,
    ddx: Vec<f64>,
    ddy: Vec<f64>,
}

impl GuideCache {
    fn new(guide: &GuidanceField, points: &[Point]) -> Self {
        let dim = guide.dim();
        let n = points.len();
        let mut c = Self { dim, value: vec![0.0; n * dim], ddx: vec![0.0; n * dim], ddy: vec![0.0; n * dim] };
        for (i, &p) in points.iter().enumerate() {
            let r = i * dim..(i + 1) * dim;
            guide.sample_with_gradient(p, &mut c.value[r.clone()], &mut c.ddx[r.clone()], &mut c.ddy[r]);
        }
        c
    }

    fn value(&self, i: usize) -> &[f64] {
        &self.value[i * self.dim..(i + 1) * self.dim]
    }

    fn ddx(&self, i: usize) -> &[f64] {
        &self.ddx[i * self.dim..(i + 1) * self.dim]
    }

    fn ddy(&self, i: usize) -> &[f64] {
        &self.ddy[i * self.dim..(i + 1) * self.dim]
    }
}

/// Objective bound to fixed samples, fields and precomputed denominators.
pub struct Objective<'a> {
    est: EdgeAwarePcf<'a>,
    guide: &'a GuidanceField,
    samples: Vec<Point>,
    lattice: DenominatorLattice,
    anchor_overlap: f64,
    targets: Vec<Vec<f64>>,
    /// Targets at the current bandwidth.
    stage_targets: Vec<Vec<f64>>,
    sigma: f64,
    uniform_guide: bool,
}

impl<'a> Objective<'a> {
    pub fn new(
        density: &'a ScalarField,
        guide: &'a GuidanceField,
        samples: &[Point],
        cfg: &SynthesisConfig,
    ) -> Result<Self> {
        let pcf = &cfg.pcf;
        if guide.dim() != pcf.bin_count {
            return Err(Error::DimensionMismatch { expected: pcf.bin_count, actual: guide.dim() });
        }
        let est = EdgeAwarePcf::new(pcf, density, guide)?;
        let lattice = DenominatorLattice::new(&est, cfg.lattice_resolution);
        let targets: Vec<Vec<f64>> = samples.iter().map(|&s| guide.sample(s)).collect();
        let sigma = est.sigma_r();
        Ok(Self {
            est,
            guide,
            samples: samples.to_vec(),
            lattice,
            anchor_overlap: cfg.anchor_overlap,
            stage_targets: targets.clone(),
            targets,
            sigma,
            uniform_guide: guide.is_uniform(),
        })
    }

    /// Widens the radial kernel to `factor` times its configured width and
    /// smooths the targets to match. The denominators are kept: away from the
    /// boundary a normalized Gaussian ring has the same mass at any width.
    pub fn set_bandwidth(&mut self, factor: f64) {
        let base = self.est.sigma_r();
        self.sigma = base * factor.max(1.0);
        if factor <= 1.0 {
            self.stage_targets = self.targets.clone();
            return;
        }
        let extra = base * libm::sqrt(factor * factor - 1.0);
        let radii = self.est.radii();
        self.stage_targets = self.targets.iter().map(|t| smooth_radial(t, radii, extra)).collect();
    }

    pub fn bandwidth(&self) -> f64 {
        self.sigma / self.est.sigma_r()
    }

    fn bins_near(&self, t: f64) -> core::ops::Range<usize> {
        self.est.bins_within(t, self.sigma)
    }

    pub fn samples(&self) -> &[Point] {
        &self.samples
    }

    pub fn lattice(&self) -> &DenominatorLattice {
        &self.lattice
    }

    /// Anchors per sample: its `ceil(overlap · n / samples)` nearest points.
    pub fn anchor_count(&self, n: usize) -> usize {
        let per = libm::ceil(self.anchor_overlap * n as f64 / self.samples.len() as f64) as usize;
        per.clamp(1, n.max(1))
    }

    /// Anchor sets, the `k_nearest` neighbours of every point (itself
    /// excluded) and per-point scales and denominators at current positions.
    pub fn neighborhoods(&self, points: &[Point]) -> Neighborhoods {
        let grid = NeighborGrid::new(points);
        let ka = self.anchor_count(points.len());
        let anchors = par::map_indexed(self.samples.len(), |s| grid.k_nearest(points, self.samples[s], ka, None));
        let k = self.est.config().k_nearest;
        let neighbors = par::map_indexed(points.len(), |i| grid.k_nearest(points, points[i], k, Some(i)));
        let scales = points.iter().map(|&p| self.est.length_scale(p)).collect();
        let m = self.est.config().bin_count;
        let mut denominators = vec![0.0; points.len() * m];
        for (p, row) in points.iter().zip(denominators.chunks_exact_mut(m)) {
            self.lattice.at(*p, row);
        }
        Neighborhoods { anchors, neighbors, scales, denominators }
    }

    fn pair_guidance(&self, cache: &GuideCache, a: usize, b: usize) -> f64 {
        self.est.guidance(cache.value(b), cache.value(a))
    }

    fn denominators<'n>(&self, nb: &'n Neighborhoods, a: usize) -> Option<&'n [f64]> {
        let m = self.est.config().bin_count;
        let row = &nb.denominators[a * m..(a + 1) * m];
        row.iter().all(|d| *d > 0.0).then_some(row)
    }

    /// PCF of every point used as an anchor, normalized by its own
    /// denominators; `None` for unused points and unusable denominators.
    fn point_pcfs(&self, points: &[Point], nb: &Neighborhoods, cache: &GuideCache) -> Vec<Option<Vec<f64>>> {
        let mut used = vec![false; points.len()];
        nb.anchors.iter().flatten().for_each(|&a| used[a] = true);
        let radii = self.est.radii();
        par::map_indexed(points.len(), |a| {
            if !used[a] {
                return None;
            }
            let denom = self.denominators(nb, a)?;
            let mut g = vec![0.0; radii.len()];
            for &b in &nb.neighbors[a] {
                let dist = points[b].distance(points[a]);
                if dist == 0.0 {
                    continue;
                }
                let t = dist / nb.scales[a];
                let w = self.pair_guidance(cache, a, b);
                for j in self.bins_near(t) {
                    g[j] += gaussian(t, radii[j], self.sigma) * w;
                }
            }
            for (v, d) in g.iter_mut().zip(denom) {
                *v /= d;
            }
            Some(g)
        })
    }

    /// Mean of the anchors' PCFs and the number of anchors averaged.
    fn sample_pcfs(&self, nb: &Neighborhoods, point_pcfs: &[Option<Vec<f64>>]) -> Vec<Option<(Vec<f64>, usize)>> {
        let m = self.est.config().bin_count;
        nb.anchors
            .iter()
            .map(|anchors| {
                let mut g = vec![0.0; m];
                let mut count = 0;
                for ga in anchors.iter().filter_map(|&a| point_pcfs[a].as_ref()) {
                    g.iter_mut().zip(ga).for_each(|(v, x)| *v += x);
                    count += 1;
                }
                (count > 0).then(|| {
                    let inv = 1.0 / count as f64;
                    g.iter_mut().for_each(|v| *v *= inv);
                    (g, count)
                })
            })
            .collect()
    }

    /// Local PCF of every sample: the mean PCF of its anchors, each anchor
    /// normalized by its own denominators; `None` where no anchor is usable.
    pub fn local_pcfs(&self, points: &[Point], nb: &Neighborhoods) -> Vec<Option<Vec<f64>>> {
        let cache = GuideCache::new(self.guide, points);
        let per_point = self.point_pcfs(points, nb, &cache);
        self.sample_pcfs(nb, &per_point).into_iter().map(|g| g.map(|(g, _)| g)).collect()
    }

    pub fn value(&self, points: &[Point], nb: &Neighborhoods) -> f64 {
        let pcfs = self.local_pcfs(points, nb);
        pcfs.iter().enumerate().filter_map(|(s, g)| g.as_ref().map(|g| squared_error(g, &self.stage_targets[s]))).sum()
    }

    /// Gradient entries from the pairs of anchor `a`, whose PCF enters the
    /// objective with per-bin weights `w` (already divided by its denominators).
    fn anchor_gradient(
        &self,
        a: usize,
        w: &[f64],
        points: &[Point],
        nb: &Neighborhoods,
        cache: &GuideCache,
    ) -> Vec<(usize, f64, f64)> {
        let radii = self.est.radii();
        let sigma = self.sigma;
        let cfg = self.est.config();
        let scale = nb.scales[a];
        let mut grad = Vec::new();
        for &b in &nb.neighbors[a] {
            let (pa, pb) = (points[a], points[b]);
            let dist = pb.distance(pa);
            if dist == 0.0 {
                continue;
            }
            let t = dist / scale;
            let (mut da, mut sb) = (0.0, 0.0);
            for j in self.bins_near(t) {
                let sj = gaussian(t, radii[j], sigma);
                da -= w[j] * sj * (t - radii[j]) / (sigma * sigma);
                sb += w[j] * sj;
            }
            let gab = self.pair_guidance(cache, a, b);
            // spatial part: ∂t/∂p_b = (p_b − p_a)/(dist · scale)
            let c = da * gab / (dist * scale);
            let (ex, ey) = (c * (pb.x - pa.x), c * (pb.y - pa.y));
            grad.push((b, ex, ey));
            grad.push((a, -ex, -ey));
            if !self.uniform_guide && sb != 0.0 {
                let (ga, gb) = (cache.value(a), cache.value(b));
                match cfg.guidance {
                    GuidanceKind::InnerProduct => {
                        let dot: f64 = ga.iter().zip(gb).map(|(x, y)| x * y).sum();
                        let k = sb * cfg.guide_bandwidth * signum(dot);
                        grad.push((b, k * dot_with(ga, cache.ddx(b)), k * dot_with(ga, cache.ddy(b))));
                        grad.push((a, k * dot_with(gb, cache.ddx(a)), k * dot_with(gb, cache.ddy(a))));
                    }
                    GuidanceKind::Gaussian => {
                        let diff: Vec<f64> = gb.iter().zip(ga).map(|(x, y)| x - y).collect();
                        let k = -sb * gab / cfg.guide_bandwidth;
                        grad.push((b, k * dot_with(&diff, cache.ddx(b)), k * dot_with(&diff, cache.ddy(b))));
                        grad.push((a, -k * dot_with(&diff, cache.ddx(a)), -k * dot_with(&diff, cache.ddy(a))));
                    }
                }
            }
        }
        grad
    }

    /// Objective and its gradient `[∂x_0, ∂y_0, …]` with neighbourhoods,
    /// scales, denominators and targets held fixed.
    pub fn value_and_gradient(&self, points: &[Point], nb: &Neighborhoods) -> (f64, Vec<f64>) {
        let cache = GuideCache::new(self.guide, points);
        let per_point = self.point_pcfs(points, nb, &cache);
        let locals = self.sample_pcfs(nb, &per_point);
        let m = self.est.config().bin_count;
        let mut value = 0.0;
        // ∂/∂g_a of the objective, accumulated over the samples using `a`.
        let mut weights = vec![0.0; points.len() * m];
        for (s, local) in locals.iter().enumerate() {
            let Some((g, count)) = local else { continue };
            let target = &self.stage_targets[s];
            value += squared_error(g, target);
            for &a in nb.anchors[s].iter().filter(|&&a| per_point[a].is_some()) {
                let w = &mut weights[a * m..(a + 1) * m];
                for ((w, g), t) in w.iter_mut().zip(g).zip(target) {
                    *w += 2.0 * (g - t) / *count as f64;
                }
            }
        }
        for (a, w) in weights.chunks_exact_mut(m).enumerate() {
            if let Some(denom) = per_point[a].as_ref().and_then(|_| self.denominators(nb, a)) {
                w.iter_mut().zip(denom).for_each(|(w, d)| *w /= d);
            }
        }
        let terms = par::map_indexed(points.len(), |a| {
            if per_point[a].is_none() {
                return Vec::new();
            }
            self.anchor_gradient(a, &weights[a * m..(a + 1) * m], points, nb, &cache)
        });
        let mut grad = vec![0.0; 2 * points.len()];
        for (i, gx, gy) in terms.into_iter().flatten() {
            grad[2 * i] += gx;
            grad[2 * i + 1] += gy;
        }
        (value, grad)
    }
}

fn signum(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn dot_with(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ring-area weighted Gaussian smoothing of a binned radial profile, read as
/// piecewise linear between bins and constant beyond the ends.
fn smooth_radial(bins: &[f64], radii: &[f64], width: f64) -> Vec<f64> {
    let n = radii.len();
    if n < 2 || width <= 0.0 {
        return bins.to_vec();
    }
    let step = (radii[n - 1] - radii[0]) / (n - 1) as f64;
    let profile = |s: f64| {
        let x = ((s - radii[0]) / step).clamp(0.0, (n - 1) as f64);
        let i = (libm::floor(x) as usize).min(n - 2);
        let f = x - i as f64;
        bins[i] * (1.0 - f) + bins[i + 1] * f
    };
    let h = width.min(step) / 16.0;
    radii
        .iter()
        .map(|&r| {
            let lo = (r - 5.0 * width).max(0.0);
            let count = libm::ceil((r + 5.0 * width - lo) / h) as usize;
            let (mut num, mut den) = (0.0, 0.0);
            for k in 0..=count {
                let s = lo + k as f64 * h;
                let w = gaussian(s, r, width) * s;
                num += w * profile(s);
                den += w;
            }
            if den > 0.0 {
                num / den
            } else {
                profile(r)
            }
        })
        .collect()
}

fn squared_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub pattern: PointPattern,
    pub initial_objective: f64,
    /// Objective of the returned pattern.
    pub final_objective: f64,
    /// Objective at every iteration, evaluated before the step.
    pub trace: Vec<f64>,
}

/// Kernel width factor at iteration `it`: geometric from `start` down to 1
/// over the first `fraction` of the run, stepped at neighbourhood refreshes.
fn bandwidth_at(it: usize, iterations: usize, refresh: usize, start: f64, fraction: f64) -> f64 {
    let span = (iterations as f64 * fraction) as usize;
    if start <= 1.0 || span == 0 {
        return 1.0;
    }
    let it = it - it % refresh;
    if it >= span {
        return 1.0;
    }
    libm::pow(start, 1.0 - it as f64 / span as f64)
}

/// ADAM over point coordinates with a learning rate per point, clamped to the
/// unit square. The kernel starts wide and narrows to its configured width;
/// from then on the pattern with the lowest objective seen at a neighbourhood
/// refresh (or at the end) is returned, so the result never scores worse than
/// the initialization.
fn optimize(
    objective: &mut Objective,
    mut x: Vec<f64>,
    cfg: &SynthesisConfig,
    lr: impl Fn(Point) -> f64,
) -> Result<(Vec<Point>, f64, f64, Vec<f64>)> {
    let to_points = |x: &[f64]| x.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect::<Vec<_>>();
    let (iterations, refresh) = (cfg.iterations, cfg.refresh_interval);
    let mut opt = Adam::new(x.len(), cfg.adam);
    let mut trace = Vec::with_capacity(iterations);
    let mut nb = objective.neighborhoods(&to_points(&x));
    objective.set_bandwidth(1.0);
    let initial = objective.value(&to_points(&x), &nb);
    let mut best = (initial, x.clone());
    let mut rates = vec![0.0; x.len() / 2];
    for it in 0..iterations {
        let points = to_points(&x);
        if it % refresh == 0 {
            if it > 0 {
                nb = objective.neighborhoods(&points);
            }
            objective.set_bandwidth(bandwidth_at(it, iterations, refresh, cfg.bandwidth_start, cfg.anneal_fraction));
        }
        let (value, grad) = objective.value_and_gradient(&points, &nb);
        if !value.is_finite() {
            return Err(Error::InvalidArgument("objective became non-finite"));
        }
        trace.push(value);
        if it % refresh == 0 && objective.bandwidth() == 1.0 && value < best.0 {
            best = (value, x.clone());
        }
        for (r, p) in rates.iter_mut().zip(&points) {
            *r = lr(*p);
        }
        opt.step_with(&mut x, &grad, |i| rates[i / 2]);
        for v in &mut x {
            *v = v.clamp(0.0, 1.0);
        }
    }
    let points = to_points(&x);
    objective.set_bandwidth(1.0);
    let last = objective.value(&points, &objective.neighborhoods(&points));
    if last <= best.0 {
        Ok((points, initial, last, trace))
    } else {
        Ok((to_points(&best.1), initial, best.0, trace))
    }
}

/// Objective of `pattern` against an image and palette at the final kernel
/// width.
pub fn objective(pattern: &PointPattern, img: &FeatureImage, palette: &Palette, cfg: &SynthesisConfig) -> Result<f64> {
    let (density, guide, samples) = image_inputs(img, palette, cfg)?;
    let obj = Objective::new(&density, &guide, &samples, cfg)?;
    let points = pattern.points();
    Ok(obj.value(points, &obj.neighborhoods(points)))
}

/// Gradient of [`objective`] with respect to the flattened coordinates
/// `[x0, y0, x1, y1, ...]`, with anchors, neighbours and denominators fixed
/// at `pattern`.
pub fn analytic_gradient(
    pattern: &PointPattern,
    img: &FeatureImage,
    palette: &Palette,
    cfg: &SynthesisConfig,
) -> Result<Vec<f64>> {
    let (density, guide, samples) = image_inputs(img, palette, cfg)?;
    let obj = Objective::new(&density, &guide, &samples, cfg)?;
    let points = pattern.points();
    Ok(obj.value_and_gradient(points, &obj.neighborhoods(points)).1)
}

fn image_inputs(
    img: &FeatureImage,
    palette: &Palette,
    cfg: &SynthesisConfig,
) -> Result<(ScalarField, GuidanceField, Vec<Point>)> {
    cfg.validate()?;
    let density = length_scale_field(img, cfg.point_budget, &cfg.pcf);
    let guide = target_field(img, palette)?;
    Ok((density, guide, jittered_samples(cfg.samples_per_axis, sample_seed(cfg.seed))))
}

fn sample_seed(seed: u64) -> u64 {
    crate::rng::mix_seed(seed, 2)
}

fn init_seed(seed: u64) -> u64 {
    crate::rng::mix_seed(seed, 1)
}

/// Full synthesis from a feature image: point budget from lightness, targets
/// and learning rates from the palette, dot radii from the ink density.
pub fn synthesize(img: &FeatureImage, palette: &Palette, cfg: &SynthesisConfig) -> Result<SynthesisResult> {
    cfg.validate()?;
    if !palette.has_tables() {
        return Err(Error::LutMissing);
    }
    let n = point_count(img, cfg.point_budget)?;
    if n == 0 && img.mean_ink() == 0.0 {
        return Err(Error::ZeroDensity);
    }
    let start = init_points(img, n, init_seed(cfg.seed))?;
    if n < 2 {
        let pattern = optimize_dot_sizes(&start, img);
        return Ok(SynthesisResult { pattern, initial_objective: 0.0, final_objective: 0.0, trace: Vec::new() });
    }
    let density = length_scale_field(img, cfg.point_budget, &cfg.pcf);
    let guide = target_field(img, palette)?;
    let samples = jittered_samples(cfg.samples_per_axis, sample_seed(cfg.seed));
    let mut obj = Objective::new(&density, &guide, &samples, cfg)?;
    let x: Vec<f64> = start.points().iter().flat_map(|p| [p.x, p.y]).collect();
    // table rates are tuned at the reference count; steps follow the local spacing
    let (points, initial, last, trace) = optimize(&mut obj, x, cfg, |p| {
        let (u, v) = img.latent_at(p);
        palette.lr_at(u, v).expect("tables checked above") * density.sample(p)
    })?;
    let pattern = optimize_dot_sizes(&PointPattern::new(points)?, img);
    Ok(SynthesisResult { pattern, initial_objective: initial, final_objective: last, trace })
}

/// Synthesis of `n` points against one constant target PCF with uniform
/// density and a single learning rate.
pub fn synthesize_target(target: &Pcf, n: usize, learning_rate: f64, cfg: &SynthesisConfig) -> Result<SynthesisResult> {
    cfg.validate()?;
    if n < 2 {
        return Err(Error::InvalidArgument("synthesis needs at least 2 points"));
    }
    if target.len() != cfg.pcf.bin_count {
        return Err(Error::DimensionMismatch { expected: cfg.pcf.bin_count, actual: target.len() });
    }
    let density = ScalarField::uniform(uniform_length_scale(n, &cfg.pcf));
    let guide = GuidanceField::uniform(target.bins());
    let samples = jittered_samples(cfg.samples_per_axis, sample_seed(cfg.seed));
    let mut obj = Objective::new(&density, &guide, &samples, cfg)?;
    let mut rng = SplitRng::new(init_seed(cfg.seed));
    let x: Vec<f64> = (0..2 * n).map(|_| rng.uniform()).collect();
    let (points, initial, last, trace) = optimize(&mut obj, x, cfg, |_| learning_rate)?;
    Ok(SynthesisResult {
        pattern: PointPattern::new(points)?,
        initial_objective: initial,
        final_objective: last,
        trace,
    })
}

/// Dot radii `r_base·sqrt(ρ/ρ̄)` clamped to `[0.25, 4]·r_base`, where
/// `r_base` is 0.4 × the mean nearest-neighbour distance and `ρ̄` the mean ink
/// over inked pixels.
pub fn optimize_dot_sizes(pattern: &PointPattern, img: &FeatureImage) -> PointPattern {
    let points = pattern.points().to_vec();
    if points.is_empty() {
        return pattern.clone();
    }
    let r_base = 0.4 * pattern.mean_nearest_neighbor_distance().unwrap_or(0.025);
    let inked: Vec<f64> = img.ink().into_iter().filter(|r| *r > 0.0).collect();
    let mean = if inked.is_empty() { 0.0 } else { inked.iter().sum::<f64>() / inked.len() as f64 };
    let radii = points
        .iter()
        .map(|&p| {
            let factor = if mean > 0.0 { libm::sqrt(img.ink_at(p) / mean) } else { 1.0 };
            r_base * factor.clamp(0.25, 4.0)
        })
        .collect();
    PointPattern::with_radii(points, radii).expect("radii are positive and match the points")
}

/// Latent probe coordinates for the realizability check: distinct basis
/// coordinates in a seeded order, topped up with uniform draws if the basis
/// is smaller than the probe count.
pub fn probe_coordinates(palette: &Palette, count: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = SplitRng::new(seed);
    let mut order: Vec<usize> = (0..palette.basis().len()).collect();
    rng.shuffle(&mut order);
    let mut probes: Vec<(f64, f64)> =
        order.iter().take(count).map(|&i| (palette.basis()[i].latent.u, palette.basis()[i].latent.v)).collect();
    while probes.len() < count {
        probes.push((rng.uniform(), rng.uniform()));
    }
    probes
}

#[derive(Debug, Clone)]
pub struct Realizability {
    pub a: f64,
    pub b: f64,
    pub ratio: f64,
    pub probes: Vec<(f64, f64)>,
}

/// Mean absolute realized-vs-target PCF error (A) over the largest per-bin
/// difference between any two probe targets (B).
pub fn realizability_metric(
    palette: &Palette,
    probe_count: usize,
    n: usize,
    cfg: &SynthesisConfig,
) -> Result<Realizability> {
    if probe_count < 2 {
        return Err(Error::InvalidArgument("probe_count must be at least 2"));
    }
    let probes = probe_coordinates(palette, probe_count, cfg.seed);
    let lightness = 100.0 * (1.0 - n as f64 / cfg.point_budget);
    let results = par::map_indexed(probes.len(), |i| -> Result<(Vec<f64>, Vec<f64>)> {
        let (u, v) = probes[i];
        let img = FeatureImage::uniform(8, 8, lightness, (u, v))?;
        let run_cfg = SynthesisConfig { seed: crate::rng::mix_seed(cfg.seed, 100 + i as u64), ..cfg.clone() };
        let out = synthesize(&img, palette, &run_cfg)?;
        let realized = crate::pcf::pattern_pcf(&out.pattern, &cfg.pcf)?;
        let target = palette.lut_pcf(u, v)?.iter().map(|&x| x as f64).collect();
        Ok((realized.bins().to_vec(), target))
    });
    let results: Vec<(Vec<f64>, Vec<f64>)> = results.into_iter().collect::<Result<_>>()?;
    let bins = cfg.pcf.bin_count as f64;
    let a =
        results.iter().map(|(r, t)| r.iter().zip(t).map(|(x, y)| libm::fabs(x - y)).sum::<f64>() / bins).sum::<f64>()
            / results.len() as f64;
    let mut b: f64 = 0.0;
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            for (x, y) in results[i].1.iter().zip(&results[j].1) {
                b = b.max(libm::fabs(x - y));
            }
        }
    }
    let ratio = if b > 0.0 { a / b } else { f64::INFINITY };
    Ok(Realizability { a, b, ratio, probes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_count_examples() {
        let black = FeatureImage::uniform(4, 4, 0.0, (0.5, 0.5)).unwrap();
        let white = FeatureImage::uniform(4, 4, 100.0, (0.5, 0.5)).unwrap();
        let gray = FeatureImage::uniform(4, 4, 50.0, (0.5, 0.5)).unwrap();
        assert_eq!(point_count(&black, 50_000.0).unwrap(), 50_000);
        assert_eq!(point_count(&white, 50_000.0).unwrap(), 0);
        assert_eq!(point_count(&gray, 50_000.0).unwrap(), 25_000);
        assert!(point_count(&gray, 0.0).is_err());
    }

    #[test]
    fn init_respects_zero_density() {
        let mut l = vec![0.0; 16];
        for row in 0..4 {
            for col in 2..4 {
                l[row * 4 + col] = 100.0;
            }
        }
        let img = FeatureImage::new(4, 4, l, vec![0.5; 16], vec![0.5; 16]).unwrap();
        let p = init_points(&img, 10_000, 3).unwrap();
        assert_eq!(p.len(), 10_000);
        assert!(p.points().iter().all(|q| q.x < 0.5));
        assert_eq!(init_points(&img, 0, 3).unwrap().len(), 0);
        let white = FeatureImage::uniform(2, 2, 100.0, (0.5, 0.5)).unwrap();
        assert_eq!(init_points(&white, 5, 0).unwrap_err(), Error::ZeroDensity);
    }

    #[test]
    fn jitter_stays_in_cells() {
        let s = jittered_samples(10, 4);
        assert_eq!(s.len(), 100);
        for (k, p) in s.iter().enumerate() {
            let (a, b) = (k % 10, k / 10);
            assert!(p.x >= a as f64 / 10.0 && p.x < (a + 1) as f64 / 10.0);
            assert!(p.y >= b as f64 / 10.0 && p.y < (b + 1) as f64 / 10.0);
        }
    }

    #[test]
    fn dot_sizes_follow_ink() {
        let uniform = FeatureImage::uniform(4, 4, 60.0, (0.5, 0.5)).unwrap();
        let pts = vec![Point::new(0.2, 0.2), Point::new(0.7, 0.3), Point::new(0.4, 0.8)];
        let p = PointPattern::new(pts.clone()).unwrap();
        let r_base = 0.4 * p.mean_nearest_neighbor_distance().unwrap();
        let out = optimize_dot_sizes(&p, &uniform);
        assert!(out.radii().unwrap().iter().all(|r| (r - r_base).abs() < 1e-15));

        // ink 0.8 at the left pixel and 0.2 at the right: mean 0.5
        let img = FeatureImage::new(2, 1, vec![20.0, 80.0], vec![0.5; 2], vec![0.5; 2]).unwrap();
        let q = PointPattern::new(vec![Point::new(0.25, 0.5), Point::new(0.75, 0.5)]).unwrap();
        let radii = optimize_dot_sizes(&q, &img).radii().unwrap().to_vec();
        let base = 0.4 * 0.5;
        assert!((radii[0] - base * libm::sqrt(0.8 / 0.5)).abs() < 1e-12);
        assert!((radii[1] - base * libm::sqrt(0.2 / 0.5)).abs() < 1e-12);
    }
}
