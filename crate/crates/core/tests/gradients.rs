use pcfmap_core::embedding::LatentCoordinate;
use pcfmap_core::features::{FeatureVector, FEATURE_LEN};
use pcfmap_core::field::{GuidanceField, ScalarField};
use pcfmap_core::image::FeatureImage;
use pcfmap_core::palette::{BasisEntry, Palette};
use pcfmap_core::pcf::Pcf;
use pcfmap_core::realizer::{spectrum_loss, spectrum_loss_gradient};
use pcfmap_core::rng::SplitRng;
use pcfmap_core::spectrum::RadialPowerSpectrum;
use pcfmap_core::synth::{analytic_gradient, jittered_samples, Objective, SynthesisConfig};
use pcfmap_core::{Point, PointPattern};

fn random_points(n: usize, seed: u64, lo: f64, hi: f64) -> Vec<Point> {
    let mut rng = SplitRng::new(seed);
    (0..n).map(|_| Point::new(rng.range(lo, hi), rng.range(lo, hi))).collect()
}

fn flatten(points: &[Point]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.x, p.y]).collect()
}

fn unflatten(x: &[f64]) -> Vec<Point> {
    x.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(numeric)
}

fn central_differences(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Three exemplars spread over the latent plane with hand-made PCFs.
fn small_palette() -> Palette {
    let bins = 20;
    let shapes: [fn(usize) -> f64; 3] = [
        |j| if j < 8 { 0.1 * j as f64 } else { 1.0 },
        |j| 1.0 + 0.6 * (-((j as f64 - 3.0) / 2.0).powi(2)).exp(),
        |_| 1.0,
    ];
    let latents = [(0.5, 0.9), (0.1, 0.1), (0.9, 0.2)];
    let entries = shapes
        .iter()
        .zip(latents)
        .map(|(f, (u, v))| BasisEntry {
            pcf: Pcf::new((0..bins).map(f).collect()).unwrap(),
            latent: LatentCoordinate::new(u, v).unwrap(),
            features: FeatureVector::new(9, vec![0.0; FEATURE_LEN]).unwrap(),
            learning_rate: 0.005,
        })
        .collect();
    let mut palette = Palette::new(entries, 9).unwrap();
    palette.build_lut();
    palette
}

/// Left half and right half carry different latent coordinates, darker on
/// the left.
fn two_region_image() -> FeatureImage {
    let (w, h) = (8, 8);
    let mut l = Vec::new();
    let mut u = Vec::new();
    let mut v = Vec::new();
    for _ in 0..h {
        for col in 0..w {
            let left = col < w / 2;
            l.push(if left { 30.0 } else { 60.0 });
            u.push(if left { 0.5 } else { 0.2 });
            v.push(if left { 0.85 } else { 0.15 });
        }
    }
    FeatureImage::new(w, h, l, u, v).unwrap()
}

#[test]
fn synthesis_gradient_matches_finite_differences() {
    let palette = small_palette();
    let img = two_region_image();
    // a budget that puts the 16 points at their natural spacing; a coarse
    // denominator lattice keeps the setup cheap
    let cfg = SynthesisConfig { point_budget: 16.0 / 0.55, lattice_resolution: 8, ..SynthesisConfig::default() };
    for seed in 0..3 {
        let points = random_points(16, seed, 0.05, 0.95);
        let pattern = PointPattern::new(points.clone()).unwrap();
        let analytic = analytic_gradient(&pattern, &img, &palette, &cfg).unwrap();

        let density = pcfmap_core::synth::length_scale_field(&img, cfg.point_budget, &cfg.pcf);
        let guide = pcfmap_core::synth::target_field(&img, &palette).unwrap();
        let samples = jittered_samples(cfg.samples_per_axis, pcfmap_core::rng::mix_seed(cfg.seed, 2));
        let obj = Objective::new(&density, &guide, &samples, &cfg).unwrap();
        let nb = obj.neighborhoods(&points);
        let numeric = central_differences(&flatten(&points), 1e-6, |x| obj.value(&unflatten(x), &nb));
        assert!(norm(&numeric) > 0.0);
        let err = relative_error(&analytic, &numeric);
        assert!(err <= 1e-4, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn widened_kernel_gradient_matches_finite_differences() {
    let cfg = SynthesisConfig::default();
    let target = Pcf::new((0..20).map(|j| if j < 6 { 0.0 } else { 1.0 }).collect()).unwrap();
    let density = ScalarField::uniform(pcfmap_core::pcf::uniform_length_scale(16, &cfg.pcf));
    let guide = GuidanceField::uniform(target.bins());
    let samples = jittered_samples(4, 5);
    let mut obj = Objective::new(&density, &guide, &samples, &cfg).unwrap();
    obj.set_bandwidth(2.5);
    let points = random_points(16, 21, 0.0, 1.0);
    let nb = obj.neighborhoods(&points);
    let (_, analytic) = obj.value_and_gradient(&points, &nb);
    let numeric = central_differences(&flatten(&points), 1e-6, |x| obj.value(&unflatten(x), &nb));
    assert!(relative_error(&analytic, &numeric) <= 1e-4);
}

#[test]
fn spectrum_loss_gradient_matches_finite_differences() {
    let target = RadialPowerSpectrum::new((0..64).map(|k| if k <= 8 { 0.0 } else { 1.0 }).collect()).unwrap();
    for seed in 0..3 {
        let points = random_points(16, 100 + seed, 0.0, 1.0);
        let (_, analytic) = spectrum_loss_gradient(&points, &target);
        let numeric = central_differences(&flatten(&points), 1e-5, |x| spectrum_loss(&unflatten(x), &target));
        let err = relative_error(&analytic, &numeric);
        assert!(err <= 1e-4, "seed {seed}: relative error {err:e}");
    }
}

/// Uniform fields, samples and points clustered away from the boundary: a
/// toroidal shift that does not wrap anything keeps every kernel inside the
/// domain, so the gradient only moves with the pattern.
#[test]
fn gradient_norm_is_translation_invariant_in_the_interior() {
    let cfg = SynthesisConfig::default();
    let target = Pcf::new((0..20).map(|j| 0.4 + 0.05 * j as f64).collect()).unwrap();
    let d = 0.25;
    let density = ScalarField::uniform(d);
    let guide = GuidanceField::uniform(target.bins());
    let points = random_points(16, 8, 0.3, 0.4);
    let samples = random_points(9, 9, 0.32, 0.38);
    let base = {
        let obj = Objective::new(&density, &guide, &samples, &cfg).unwrap();
        let nb = obj.neighborhoods(&points);
        norm(&obj.value_and_gradient(&points, &nb).1)
    };
    assert!(base > 0.0);
    for (dx, dy) in [(0.25, 0.0), (0.1, 0.3), (0.31, 0.27)] {
        let shift = |p: &Point| Point::new((p.x + dx) % 1.0, (p.y + dy) % 1.0);
        let moved: Vec<Point> = points.iter().map(shift).collect();
        let moved_samples: Vec<Point> = samples.iter().map(shift).collect();
        let obj = Objective::new(&density, &guide, &moved_samples, &cfg).unwrap();
        let nb = obj.neighborhoods(&moved);
        let shifted = norm(&obj.value_and_gradient(&moved, &nb).1);
        assert!((shifted - base).abs() <= 1e-6 * base.max(1.0), "{shifted} vs {base}");
    }
}

#[test]
fn gradient_vanishes_at_a_converged_configuration() {
    let cfg = SynthesisConfig::default();
    let target = Pcf::new((0..20).map(|j| if j < 5 { 0.2 } else { 1.0 }).collect()).unwrap();
    let density = ScalarField::uniform(0.25);
    let guide = GuidanceField::uniform(target.bins());
    let samples = random_points(9, 31, 0.42, 0.48);
    let obj = Objective::new(&density, &guide, &samples, &cfg).unwrap();
    let start = random_points(16, 30, 0.4, 0.5);
    let nb = obj.neighborhoods(&start);
    let (mut value, grad0) = obj.value_and_gradient(&start, &nb);
    let initial = norm(&grad0);
    assert!(initial > 0.0);

    // gradient descent with backtracking on the fixed-neighbourhood objective
    let mut x = flatten(&start);
    let mut grad = grad0;
    let mut step = 1e-3 / initial;
    for _ in 0..20_000 {
        if norm(&grad) <= 1e-4 * initial {
            break;
        }
        loop {
            let trial: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
            let (v, g) = obj.value_and_gradient(&unflatten(&trial), &nb);
            if v <= value - 1e-4 * step * norm(&grad).powi(2) {
                (x, value, grad) = (trial, v, g);
                step *= 1.5;
                break;
            }
            step *= 0.5;
            assert!(step > 1e-30, "line search failed");
        }
    }
    let last = norm(&grad);
    assert!(last <= 1e-3 * initial, "{last:e} vs initial {initial:e}");
}
