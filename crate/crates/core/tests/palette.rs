use std::sync::OnceLock;

use pcfmap_core::embedding::LatentCoordinate;
use pcfmap_core::estimate::{estimate_correlation_map, estimate_feature_image, EstimateOptions};
use pcfmap_core::features::FilterBank;
use pcfmap_core::field::{GuidanceField, ScalarField};
use pcfmap_core::palette::{
    build_palette, lut_cell_center, lut_index, PaletteBuild, PaletteOptions, LEARNING_RATES, LUT_SIZE,
};
use pcfmap_core::pcf::{estimate_pcf, uniform_length_scale, PcfConfig};
use pcfmap_core::realizer::{realize, DEFAULT_STEP};
use pcfmap_core::rng::SplitRng;
use pcfmap_core::spectrum::sample_indexed;
use pcfmap_core::synth::{synthesize, SynthesisConfig};
use pcfmap_core::{Point, PointPattern};

const SEED: u64 = 21;
const COUNT: usize = 12;
const REALIZE_ITERATIONS: usize = 100;

fn build() -> &'static PaletteBuild {
    static CELL: OnceLock<PaletteBuild> = OnceLock::new();
    CELL.get_or_init(|| {
        let opts = PaletteOptions {
            count: COUNT,
            seed: SEED,
            realize_iterations: REALIZE_ITERATIONS,
            lr_iterations: 100,
            ..PaletteOptions::default()
        };
        build_palette(&opts).unwrap()
    })
}

fn bank() -> FilterBank {
    FilterBank::new(build().palette.feature_seed())
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn lut_at(z: LatentCoordinate) -> Vec<f64> {
    build().palette.lut_pcf(z.u, z.v).unwrap().iter().map(|&x| x as f64).collect()
}

/// `pattern` shrunk by half and tiled 2×2: four times the points with the
/// same correlation at half the spacing.
fn tile_half(pattern: &PointPattern, keep: impl Fn(Point) -> bool) -> Vec<Point> {
    let mut out = Vec::new();
    for b in 0..2 {
        for a in 0..2 {
            for p in pattern.points() {
                let q = Point::new((a as f64 + p.x) / 2.0, (b as f64 + p.y) / 2.0);
                if keep(q) {
                    out.push(q);
                }
            }
        }
    }
    out
}

#[test]
fn palette_shape() {
    let b = build();
    let palette = &b.palette;
    assert_eq!(palette.basis().len(), COUNT);
    assert!(b.final_stress <= b.initial_stress);
    assert_eq!(palette.lut().unwrap().len(), LUT_SIZE * LUT_SIZE * 20);
    assert!(palette.lr_table().unwrap().iter().all(|r| LEARNING_RATES.iter().any(|g| *g as f32 == *r)));
    for e in palette.basis() {
        assert!((0.0..=1.0).contains(&e.latent.u) && (0.0..=1.0).contains(&e.latent.v));
    }
    // the anchor lies straight towards v = 0 from the centroid
    let n = palette.basis().len() as f64;
    let mean_u = palette.basis().iter().map(|e| e.latent.u).sum::<f64>() / n;
    let mean_v = palette.basis().iter().map(|e| e.latent.v).sum::<f64>() / n;
    let anchor = palette.basis()[b.blue_index].latent;
    assert!((anchor.u - mean_u).abs() < 1e-9);
    assert!(anchor.v < mean_v);
}

#[test]
fn encode_reproduces_and_bounds_the_basis() {
    let palette = &build().palette;
    for e in palette.basis() {
        assert!(linf(palette.encode(e.latent).bins(), e.pcf.bins()) <= 1e-3);
        assert!(linf(&lut_at(e.latent), e.pcf.bins()) <= 0.05);
    }
    let mut rng = SplitRng::new(4);
    for _ in 0..200 {
        let z = LatentCoordinate::new(rng.uniform(), rng.uniform()).unwrap();
        let g = palette.encode(z);
        for (j, v) in g.bins().iter().enumerate() {
            let lo = palette.basis().iter().map(|e| e.pcf.bins()[j]).fold(f64::INFINITY, f64::min);
            let hi = palette.basis().iter().map(|e| e.pcf.bins()[j]).fold(f64::NEG_INFINITY, f64::max);
            assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
        }
    }
}

#[test]
fn decode_returns_the_exemplar_coordinates() {
    let b = build();
    let bank = bank();
    for (pattern, e) in b.patterns.iter().zip(b.palette.basis()) {
        let z = b.palette.decode(pattern, &bank).unwrap();
        assert_eq!(z, e.latent);
        // snapped to the table and looked up there
        let snapped = LatentCoordinate::new(lut_cell_center(lut_index(z.u)), lut_cell_center(lut_index(z.v))).unwrap();
        assert!(linf(&lut_at(snapped), b.palette.encode(z).bins()) <= 0.05);
    }
    assert!(b.palette.decode(&b.patterns[0], &FilterBank::new(1)).is_err());
}

#[test]
fn fresh_realizations_decode_near_their_exemplar() {
    let b = build();
    let bank = bank();
    let mut close = 0;
    for k in 0..20u64 {
        let i = (k % COUNT as u64) as usize;
        let (_, spectrum) = sample_indexed(SEED, i as u64);
        let fresh = realize(&spectrum, 1024, REALIZE_ITERATIONS, DEFAULT_STEP, 9000 + k).unwrap().pattern;
        let z = b.palette.decode(&fresh, &bank).unwrap();
        if z.distance(b.palette.basis()[i].latent) <= 0.15 {
            close += 1;
        }
    }
    assert!(close >= 16, "{close} of 20");
}

fn farthest_pair() -> (usize, usize) {
    let basis = build().palette.basis();
    let mut best = (0.0, 0, 1);
    for i in 0..basis.len() {
        for j in i + 1..basis.len() {
            let d = basis[i].latent.distance(basis[j].latent);
            if d > best.0 {
                best = (d, i, j);
            }
        }
    }
    (best.1, best.2)
}

#[test]
fn two_region_windows_classify_to_their_region() {
    let b = build();
    let (i, j) = farthest_pair();
    let mut points = tile_half(&b.patterns[i], |q| q.x < 0.5);
    points.extend(tile_half(&b.patterns[j], |q| q.x >= 0.5));
    let pattern = PointPattern::new(points).unwrap();
    let (resolution, window, stride) = (64, 0.25, 4);
    let map = estimate_correlation_map(&pattern, &b.palette, &bank(), resolution, window, stride).unwrap();
    let again = estimate_correlation_map(&pattern, &b.palette, &bank(), resolution, window, stride).unwrap();
    assert_eq!(map, again);

    let (zi, zj) = (b.palette.basis()[i].latent, b.palette.basis()[j].latent);
    let (mut eligible, mut right) = (0, 0);
    for r in 0..map.rows {
        for c in 0..map.cols {
            let centre = ((c as f64 + 0.5) * stride as f64 / resolution as f64 - window / 2.0).clamp(0.0, 1.0 - window)
                + window / 2.0;
            if (centre - 0.5).abs() < window / 2.0 {
                continue;
            }
            eligible += 1;
            let own = if centre < 0.5 { zi } else { zj };
            if map.coords[r * map.cols + c] == own {
                right += 1;
            }
        }
    }
    assert!(right as f64 >= 0.8 * eligible as f64, "{right} of {eligible}");
}

/// Mean over queries of the uniform-field PCF at 100 interior points.
fn interior_pcf(pattern: &PointPattern) -> Vec<f64> {
    let cfg = PcfConfig::default();
    let queries: Vec<Point> = pattern
        .points()
        .iter()
        .copied()
        .filter(|p| p.x.min(p.y).min(1.0 - p.x).min(1.0 - p.y) > 0.1)
        .take(100)
        .collect();
    let d = ScalarField::uniform(uniform_length_scale(pattern.len(), &cfg));
    let pcfs = estimate_pcf(pattern, &d, &GuidanceField::uniform(&[1.0]), &queries, &cfg).unwrap();
    let mut mean = vec![0.0; cfg.bin_count];
    for g in &pcfs {
        mean.iter_mut().zip(g.bins()).for_each(|(m, v)| *m += v / pcfs.len() as f64);
    }
    mean
}

#[test]
fn resynthesis_from_an_estimated_map_keeps_the_correlation() {
    let b = build();
    let source = PointPattern::new(tile_half(&b.patterns[farthest_pair().0], |_| true)).unwrap();
    assert_eq!(source.len(), 4096);
    // windows of the reference count and a smooth density estimate: finer
    // settings feed window-to-window decode and spacing noise into the target
    let opts = EstimateOptions { window: 0.5, bandwidth: 0.15, ..EstimateOptions::with_resolution(32) };
    let (img, _) = estimate_feature_image(&source, &b.palette, &bank(), &opts).unwrap();
    let cfg = SynthesisConfig { iterations: 1000, seed: 3, ..SynthesisConfig::default() };
    let out = synthesize(&img, &b.palette, &cfg).unwrap();
    assert!((out.pattern.len() as f64 - 4096.0).abs() <= 41.0);
    let (want, got) = (interior_pcf(&source), interior_pcf(&out.pattern));
    let mean_diff = want.iter().zip(&got).map(|(a, b)| (a - b).abs()).sum::<f64>() / want.len() as f64;
    assert!(mean_diff <= 0.25, "{mean_diff}");
}
