use std::sync::OnceLock;

use pcfmap_core::embedding::LatentCoordinate;
use pcfmap_core::features::{FeatureVector, FEATURE_LEN};
use pcfmap_core::image::FeatureImage;
use pcfmap_core::palette::{BasisEntry, Palette};
use pcfmap_core::pcf::{pattern_pcf, Pcf, PcfConfig};
use pcfmap_core::realizer::realize;
use pcfmap_core::spectrum::RadialPowerSpectrum;
use pcfmap_core::synth::{init_points, objective, optimize_dot_sizes, point_count, synthesize, SynthesisConfig};
use pcfmap_core::{Point, PointPattern};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// PCF of a realized blue-noise pattern.
fn blue_pcf() -> &'static Pcf {
    static CELL: OnceLock<Pcf> = OnceLock::new();
    CELL.get_or_init(|| {
        let target = RadialPowerSpectrum::new((0..64).map(|k| if k <= 8 { 0.0 } else { 1.0 }).collect()).unwrap();
        let pattern = realize(&target, 1024, 300, 1e-3, 2).unwrap().pattern;
        pattern_pcf(&pattern, &PcfConfig::default()).unwrap()
    })
}

fn single_entry_palette(pcf: &Pcf) -> Palette {
    single_entry_palette_at(pcf, 0.001)
}

fn single_entry_palette_at(pcf: &Pcf, learning_rate: f64) -> Palette {
    let entry = BasisEntry {
        pcf: pcf.clone(),
        latent: LatentCoordinate::new(0.5, 0.2).unwrap(),
        features: FeatureVector::new(1, vec![0.0; FEATURE_LEN]).unwrap(),
        learning_rate,
    };
    let mut palette = Palette::new(vec![entry], 1).unwrap();
    palette.build_lut();
    palette
}

fn lightness_for(n: f64) -> f64 {
    100.0 * (1.0 - n / 50_000.0)
}

#[test]
fn uniform_initialization_passes_chi_square() {
    let img = FeatureImage::uniform(4, 4, 37.0, (0.5, 0.5)).unwrap();
    let n = 6400;
    let critical = ChiSquared::new(63.0).unwrap().inverse_cdf(0.99);
    for seed in 0..10 {
        let p = init_points(&img, n, seed).unwrap();
        let mut counts = [0usize; 64];
        for q in p.points() {
            let (i, j) = (((q.x * 8.0) as usize).min(7), ((q.y * 8.0) as usize).min(7));
            counts[j * 8 + i] += 1;
        }
        let expected = n as f64 / 64.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < critical, "seed {seed}: {chi2} >= {critical}");
    }
}

#[test]
fn blue_noise_synthesis_converges() {
    let target = blue_pcf();
    // large steps leave the small-radius bins jittering around the target
    let palette = single_entry_palette_at(target, 1e-4);
    let img = FeatureImage::uniform(8, 8, lightness_for(1024.0), (0.5, 0.2)).unwrap();
    let cfg = SynthesisConfig { iterations: 3000, seed: 5, ..SynthesisConfig::default() };
    let out = synthesize(&img, &palette, &cfg).unwrap();
    assert_eq!(out.pattern.len(), point_count(&img, cfg.point_budget).unwrap());
    assert!(out.pattern.points().iter().all(|p| p.in_unit_square()));
    assert!(out.trace.iter().all(|v| v.is_finite()));
    assert!(out.final_objective <= out.initial_objective);

    let start = init_points(&img, 1024, pcfmap_core::rng::mix_seed(cfg.seed, 1)).unwrap();
    let white = objective(&start, &img, &palette, &cfg).unwrap();
    assert_eq!(white, out.initial_objective);
    let reached = objective(&out.pattern, &img, &palette, &cfg).unwrap();
    assert!(reached <= 0.05 * white, "{reached} vs {white}");

    let pcf = PcfConfig::default();
    let before = pattern_pcf(&start, &pcf).unwrap().l2_distance(target);
    let after = pattern_pcf(&out.pattern, &pcf).unwrap().l2_distance(target);
    assert!(after <= 0.1 * before, "{after} vs {before}");
}

#[test]
fn synthesis_is_deterministic() {
    let palette = single_entry_palette(blue_pcf());
    let img = FeatureImage::uniform(8, 8, lightness_for(300.0), (0.5, 0.2)).unwrap();
    let cfg = SynthesisConfig { iterations: 120, seed: 9, ..SynthesisConfig::default() };
    let a = synthesize(&img, &palette, &cfg).unwrap();
    let b = synthesize(&img, &palette, &cfg).unwrap();
    assert_eq!(a.pattern, b.pattern);
    assert_eq!(a.trace, b.trace);
    let other = synthesize(&img, &palette, &SynthesisConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a.pattern, other.pattern);
}

#[test]
fn objective_is_reproducible_and_non_negative() {
    let palette = single_entry_palette(blue_pcf());
    let img = FeatureImage::uniform(4, 4, lightness_for(500.0), (0.5, 0.2)).unwrap();
    let cfg = SynthesisConfig::default();
    let p = init_points(&img, 500, 3).unwrap();
    let a = objective(&p, &img, &palette, &cfg).unwrap();
    assert!(a >= 0.0);
    assert_eq!(a.to_bits(), objective(&p, &img, &palette, &cfg).unwrap().to_bits());
}

#[test]
fn missing_tables_and_blank_images_are_rejected() {
    let entry = BasisEntry {
        pcf: Pcf::constant(1.0, 20),
        latent: LatentCoordinate::new(0.5, 0.5).unwrap(),
        features: FeatureVector::new(1, vec![0.0; FEATURE_LEN]).unwrap(),
        learning_rate: 0.001,
    };
    let bare = Palette::new(vec![entry], 1).unwrap();
    let img = FeatureImage::uniform(2, 2, 50.0, (0.5, 0.5)).unwrap();
    assert!(synthesize(&img, &bare, &SynthesisConfig::default()).is_err());
    let white = FeatureImage::uniform(2, 2, 100.0, (0.5, 0.5)).unwrap();
    let palette = single_entry_palette(&Pcf::constant(1.0, 20));
    assert!(synthesize(&white, &palette, &SynthesisConfig::default()).is_err());
}

fn arb_image() -> impl Strategy<Value = FeatureImage> {
    prop::collection::vec(0.0..100.0f64, 16)
        .prop_map(|l| FeatureImage::new(4, 4, l, vec![0.5; 16], vec![0.5; 16]).unwrap())
}

fn arb_points() -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y)| Point::new(x, y)), 2..60)
}

proptest! {
    #[test]
    fn dot_radii_stay_within_the_clamp(img in arb_image(), points in arb_points()) {
        let p = PointPattern::new(points).unwrap();
        let r_base = 0.4 * p.mean_nearest_neighbor_distance().unwrap();
        let out = optimize_dot_sizes(&p, &img);
        for r in out.radii().unwrap() {
            prop_assert!(*r >= 0.25 * r_base * (1.0 - 1e-12) && *r <= 4.0 * r_base * (1.0 + 1e-12));
        }
    }

    #[test]
    fn point_count_matches_the_formula(img in arb_image(), budget in 1.0..1e5f64) {
        let mean = img.lightness().iter().map(|l| 1.0 - l / 100.0).sum::<f64>() / 16.0;
        prop_assert_eq!(point_count(&img, budget).unwrap(), (budget * mean).round() as usize);
    }
}
