//! The palette: basis exemplars placed in the latent plane, plus the
//! quantized PCF and learning-rate tables used at synthesis time.

use alloc::vec;
use alloc::vec::Vec;

use crate::embedding::{align_and_normalize, idw, mds_embed_with, nearest_exemplar, LatentCoordinate, Locality};
use crate::error::{Error, Result};
use crate::features::{distance_matrix, perceptual_distance, FeatureVector, FilterBank};
use crate::par;
use crate::pattern::PointPattern;
use crate::pcf::{step_pcf, Pcf, PcfConfig};
use crate::realizer::{generate_basis, BasisPattern};
use crate::rng::mix_seed;
use crate::synth::{synthesize_target, SynthesisConfig};

pub const LUT_SIZE: usize = 256;
/// Objective ratio to the best grid run below which a rate counts as converged.
pub const CONVERGED_FACTOR: f64 = 2.0;
pub const LEARNING_RATES: [f64; 7] = [0.02, 0.01, 0.005, 0.001, 0.0005, 0.0001, 0.00005];

#[derive(Debug, Clone, PartialEq)]
pub struct BasisEntry {
    pub pcf: Pcf,
    pub latent: LatentCoordinate,
    pub features: FeatureVector,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Palette {
    basis: Vec<BasisEntry>,
    feature_seed: u64,
    locality: Locality,
    lut: Option<Vec<f32>>,
    lr_table: Option<Vec<f32>>,
}

/// LUT cell index of a latent component.
pub fn lut_index(c: f64) -> usize {
    let i = libm::floor(c * LUT_SIZE as f64);
    if i <= 0.0 {
        0
    } else {
        (i as usize).min(LUT_SIZE - 1)
    }
}

pub fn lut_cell_center(i: usize) -> f64 {
    (i as f64 + 0.5) / LUT_SIZE as f64
}

impl Palette {
    pub fn new(basis: Vec<BasisEntry>, feature_seed: u64) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvalidArgument("palette needs at least one basis entry"));
        }
        let bins = basis[0].pcf.len();
        for e in &basis {
            if e.pcf.len() != bins {
                return Err(Error::DimensionMismatch { expected: bins, actual: e.pcf.len() });
            }
            if e.features.seed() != feature_seed {
                return Err(Error::ExtractorMismatch);
            }
            if !LEARNING_RATES.contains(&e.learning_rate) {
                return Err(Error::InvalidArgument("learning rate outside the grid"));
            }
            LatentCoordinate::new(e.latent.u, e.latent.v)?;
        }
        let coords: Vec<LatentCoordinate> = basis.iter().map(|e| e.latent).collect();
        let locality = Locality::new(&coords)?;
        Ok(Self { basis, feature_seed, locality, lut: None, lr_table: None })
    }

    /// Attaches precomputed tables (e.g. read from a file).
    pub fn with_tables(mut self, lut: Vec<f32>, lr_table: Vec<f32>) -> Result<Self> {
        let cells = LUT_SIZE * LUT_SIZE;
        if lut.len() != cells * self.bin_count() {
            return Err(Error::DimensionMismatch { expected: cells * self.bin_count(), actual: lut.len() });
        }
        if lr_table.len() != cells {
            return Err(Error::DimensionMismatch { expected: cells, actual: lr_table.len() });
        }
        if lut.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("lut entries must be finite and non-negative"));
        }
        if lr_table.iter().any(|v| !LEARNING_RATES.iter().any(|r| *r as f32 == *v)) {
            return Err(Error::InvalidArgument("learning rate outside the grid"));
        }
        self.lut = Some(lut);
        self.lr_table = Some(lr_table);
        Ok(self)
    }

    pub fn basis(&self) -> &[BasisEntry] {
        &self.basis
    }

    pub fn feature_seed(&self) -> u64 {
        self.feature_seed
    }

    pub fn bin_count(&self) -> usize {
        self.basis[0].pcf.len()
    }

    pub fn has_tables(&self) -> bool {
        self.lut.is_some() && self.lr_table.is_some()
    }

    pub fn lut(&self) -> Option<&[f32]> {
        self.lut.as_deref()
    }

    pub fn lr_table(&self) -> Option<&[f32]> {
        self.lr_table.as_deref()
    }

    pub fn locality(&self, z: LatentCoordinate) -> f64 {
        self.locality.exponent(z)
    }

    fn coords(&self) -> Vec<LatentCoordinate> {
        self.basis.iter().map(|e| e.latent).collect()
    }

    /// IDW blend of the basis PCFs with the local exponent.
    pub fn encode(&self, z: LatentCoordinate) -> Pcf {
        let pcfs: Vec<Pcf> = self.basis.iter().map(|e| e.pcf.clone()).collect();
        idw(z, &self.coords(), &pcfs, self.locality(z))
    }

    /// Latent coordinate of the perceptually nearest basis entry.
    pub fn decode(&self, pattern: &PointPattern, bank: &FilterBank) -> Result<LatentCoordinate> {
        if bank.seed() != self.feature_seed {
            return Err(Error::ExtractorMismatch);
        }
        self.decode_features(&bank.feature_stats(pattern))
    }

    pub fn decode_features(&self, features: &FeatureVector) -> Result<LatentCoordinate> {
        if features.seed() != self.feature_seed {
            return Err(Error::ExtractorMismatch);
        }
        let basis: Vec<FeatureVector> = self.basis.iter().map(|e| e.features.clone()).collect();
        Ok(self.basis[nearest_exemplar(features, &basis)?].latent)
    }

    /// Index of the basis entry nearest to `z` in the latent plane.
    pub fn nearest_basis(&self, z: LatentCoordinate) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, e) in self.basis.iter().enumerate() {
            let d = z.distance(e.latent);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// Fills the 256×256 tables: the encoded PCF at each cell centre and the
    /// learning rate of the latent-nearest basis entry.
    pub fn build_lut(&mut self) {
        let bins = self.bin_count();
        let rows = par::map_indexed(LUT_SIZE, |j| {
            let mut lut = Vec::with_capacity(LUT_SIZE * bins);
            let mut lr = Vec::with_capacity(LUT_SIZE);
            for i in 0..LUT_SIZE {
                let z = LatentCoordinate { u: lut_cell_center(i), v: lut_cell_center(j) };
                lut.extend(self.encode(z).bins().iter().map(|&b| b as f32));
                lr.push(self.basis[self.nearest_basis(z)].learning_rate as f32);
            }
            (lut, lr)
        });
        let mut lut = Vec::with_capacity(LUT_SIZE * LUT_SIZE * bins);
        let mut lr = Vec::with_capacity(LUT_SIZE * LUT_SIZE);
        for (l, r) in rows {
            lut.extend(l);
            lr.extend(r);
        }
        self.lut = Some(lut);
        self.lr_table = Some(lr);
    }

    /// Table PCF of the cell containing `(u, v)`; layout `(j·256 + i)·bins`.
    pub fn lut_pcf(&self, u: f64, v: f64) -> Result<&[f32]> {
        let lut = self.lut.as_ref().ok_or(Error::LutMissing)?;
        let bins = self.bin_count();
        let at = (lut_index(v) * LUT_SIZE + lut_index(u)) * bins;
        Ok(&lut[at..at + bins])
    }

    pub fn lr_at(&self, u: f64, v: f64) -> Result<f64> {
        let table = self.lr_table.as_ref().ok_or(Error::LutMissing)?;
        let stored = table[lut_index(v) * LUT_SIZE + lut_index(u)];
        Ok(LEARNING_RATES.iter().copied().find(|r| *r as f32 == stored).unwrap_or(stored as f64))
    }
}

/// Scores of a learning-rate search, in [`LEARNING_RATES`] order.
#[derive(Debug, Clone)]
pub struct LearningRateSearch {
    pub best: f64,
    pub scores: Vec<f64>,
    pub pcf_errors: Vec<f64>,
}

/// Runs a constant-target synthesis per grid rate and keeps the rate whose
/// result is perceptually closest to `reference` (first on ties). Only rates
/// whose final objective is within `CONVERGED_FACTOR` of the best one compete:
/// the feature metric alone can rank an unconverged pattern first.
pub fn best_learning_rate(
    target: &Pcf,
    reference: &FeatureVector,
    bank: &FilterBank,
    n: usize,
    cfg: &SynthesisConfig,
) -> Result<LearningRateSearch> {
    let mut scores = Vec::with_capacity(LEARNING_RATES.len());
    let mut pcf_errors = Vec::with_capacity(LEARNING_RATES.len());
    for &lr in &LEARNING_RATES {
        let out = synthesize_target(target, n, lr, cfg)?;
        scores.push(perceptual_distance(&bank.feature_stats(&out.pattern), reference)?);
        pcf_errors.push(out.final_objective);
    }
    let floor = pcf_errors.iter().copied().fold(f64::INFINITY, f64::min);
    let converged = |i: usize| pcf_errors[i] <= CONVERGED_FACTOR * floor;
    let mut best = (0..scores.len()).find(|&i| converged(i)).unwrap_or(0);
    for (i, s) in scores.iter().enumerate() {
        if converged(i) && *s < scores[best] {
            best = i;
        }
    }
    Ok(LearningRateSearch { best: LEARNING_RATES[best], scores, pcf_errors })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaletteOptions {
    pub count: usize,
    pub points: usize,
    pub seed: u64,
    pub feature_seed: u64,
    pub realize_iterations: usize,
    pub realize_step: f64,
    pub mds_iterations: usize,
    pub lr_iterations: usize,
    pub pcf: PcfConfig,
}

impl Default for PaletteOptions {
    fn default() -> Self {
        Self {
            count: 1000,
            points: 1024,
            seed: 0,
            feature_seed: crate::features::DEFAULT_FEATURE_SEED,
            realize_iterations: crate::realizer::DEFAULT_ITERATIONS,
            realize_step: crate::realizer::DEFAULT_STEP,
            mds_iterations: crate::embedding::MDS_ITERATIONS,
            lr_iterations: 1000,
            pcf: PcfConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PaletteBuild {
    pub palette: Palette,
    pub patterns: Vec<PointPattern>,
    pub blue_index: usize,
    pub initial_stress: f64,
    pub final_stress: f64,
}

/// Basis realization, descriptors, MDS (on dissimilarities scaled to a
/// maximum of 1), alignment, learning-rate search and tables.
pub fn build_palette(opts: &PaletteOptions) -> Result<PaletteBuild> {
    let basis: Vec<BasisPattern> =
        generate_basis(opts.count, opts.points, opts.realize_iterations, opts.realize_step, opts.seed, &opts.pcf)?;
    let bank = FilterBank::new(opts.feature_seed);
    let features: Vec<FeatureVector> = par::map_indexed(basis.len(), |i| bank.feature_stats(&basis[i].pattern));

    let (coords, blue_index, initial_stress, final_stress) = if basis.len() == 1 {
        (vec![LatentCoordinate { u: 0.5, v: 0.5 }], 0, 0.0, 0.0)
    } else {
        let dissim = distance_matrix(&features)?;
        let max = dissim.max_value();
        let scaled = if max > 0.0 { dissim.scaled(1.0 / max) } else { dissim };
        let mds = mds_embed_with(&scaled, mix_seed(opts.seed, 3), opts.mds_iterations)?;
        let blue = blue_anchor(&basis, &opts.pcf);
        (align_and_normalize(&mds.coords, blue)?, blue, mds.initial_stress, mds.final_stress)
    };

    let rates = par::map_indexed(basis.len(), |i| {
        let cfg = SynthesisConfig {
            iterations: opts.lr_iterations.max(1),
            seed: mix_seed(opts.seed, 1000 + i as u64),
            pcf: opts.pcf.clone(),
            ..SynthesisConfig::default()
        };
        best_learning_rate(&basis[i].pcf, &features[i], &bank, opts.points, &cfg).map(|s| s.best)
    });
    let mut entries = Vec::with_capacity(basis.len());
    for (((b, f), z), lr) in basis.iter().zip(features).zip(coords).zip(rates) {
        entries.push(BasisEntry { pcf: b.pcf.clone(), latent: z, features: f, learning_rate: lr? });
    }
    let mut palette = Palette::new(entries, opts.feature_seed)?;
    palette.build_lut();
    Ok(PaletteBuild {
        palette,
        patterns: basis.into_iter().map(|b| b.pattern).collect(),
        blue_index,
        initial_stress,
        final_stress,
    })
}

/// Basis entry whose PCF is nearest (L2) to the canonical step PCF.
pub fn blue_anchor(basis: &[BasisPattern], cfg: &PcfConfig) -> usize {
    let step = step_pcf(cfg);
    let mut best = (f64::INFINITY, 0);
    for (i, b) in basis.iter().enumerate() {
        let d = b.pcf.l2_distance(&step);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}
