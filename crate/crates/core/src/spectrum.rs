//! Gaussian-mixture target spectra and radially averaged periodograms.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::pattern::{Point, PointPattern};
use crate::rng::SplitRng;

pub const SPECTRUM_BINS: usize = 64;

pub const AMPLITUDE_RANGE: (f64, f64) = (1.0, 3.0);
pub const MEAN_RANGE: (f64, f64) = (0.0, 68.0);
pub const STD_RANGE: (f64, f64) = (2.0, 12.0);

/// Radially averaged power spectrum; bin `k` is radial frequency `k` in
/// cycles per unit domain. Bin 0 (DC) is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPowerSpectrum {
    bins: Vec<f64>,
}

impl RadialPowerSpectrum {
    pub fn new(mut bins: Vec<f64>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::InvalidArgument("spectrum needs at least one bin"));
        }
        if bins.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::InvalidArgument("spectrum bins must be finite and non-negative"));
        }
        bins[0] = 0.0;
        Ok(Self { bins })
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
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMode {
    pub amplitude: f64,
    pub mean: f64,
    pub std: f64,
}

/// One or two Gaussian bumps over radial frequency plus a constant floor.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmSpectrumParams {
    modes: Vec<GaussianMode>,
    floor: f64,
}

fn within(v: f64, (lo, hi): (f64, f64)) -> bool {
    v >= lo && v <= hi
}

impl GmmSpectrumParams {
    pub fn new(modes: Vec<GaussianMode>, floor: f64) -> Result<Self> {
        if !(1..=2).contains(&modes.len()) {
            return Err(Error::InvalidArgument("mode count must be 1 or 2"));
        }
        if floor != 0.0 && floor != 1.0 {
            return Err(Error::InvalidArgument("floor must be 0 or 1"));
        }
        for m in &modes {
            if !within(m.amplitude, AMPLITUDE_RANGE) || !within(m.mean, MEAN_RANGE) || !within(m.std, STD_RANGE) {
                return Err(Error::InvalidArgument("mode parameter out of range"));
            }
        }
        Ok(Self { modes, floor })
    }

    pub fn modes(&self) -> &[GaussianMode] {
        &self.modes
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn value(&self, k: f64) -> f64 {
        let bumps: f64 = self
            .modes
            .iter()
            .map(|m| {
                let z = k - m.mean;
                m.amplitude * libm::exp(-z * z / (2.0 * m.std * m.std))
            })
            .sum();
        bumps + self.floor
    }

    pub fn evaluate(&self, bin_count: usize) -> RadialPowerSpectrum {
        let mut bins: Vec<f64> = (0..bin_count).map(|k| self.value(k as f64)).collect();
        bins[0] = 0.0;
        RadialPowerSpectrum { bins }
    }

    fn draw(rng: &mut SplitRng) -> Self {
        // fair coin for the mode count; the floor is a second coin
        let count = if rng.coin() { 1 } else { 2 };
        let modes = (0..count)
            .map(|_| GaussianMode {
                amplitude: rng.range(AMPLITUDE_RANGE.0, AMPLITUDE_RANGE.1),
                mean: rng.range(MEAN_RANGE.0, MEAN_RANGE.1),
                std: rng.range(STD_RANGE.0, STD_RANGE.1),
            })
            .collect();
        let floor = if rng.coin() { 1.0 } else { 0.0 };
        Self { modes, floor }
    }
}

/// Draws one parameter set and its 64-bin spectrum. Equal to element 0 of
/// [`sample_spectra`] with the same seed.
pub fn sample_spectrum(seed: u64) -> (GmmSpectrumParams, RadialPowerSpectrum) {
    sample_indexed(seed, 0)
}

/// Spectrum `i` comes from RNG stream `i`, so any subset is reproducible.
pub fn sample_spectra(seed: u64, count: usize) -> Vec<(GmmSpectrumParams, RadialPowerSpectrum)> {
    (0..count as u64).map(|i| sample_indexed(seed, i)).collect()
}

pub fn sample_indexed(seed: u64, index: u64) -> (GmmSpectrumParams, RadialPowerSpectrum) {
    let mut rng = SplitRng::stream(seed, index);
    let params = GmmSpectrumParams::draw(&mut rng);
    let spectrum = params.evaluate(SPECTRUM_BINS);
    (params, spectrum)
}

/// One row of the half-plane frequency lattice: fixed `fy`, contiguous `fx`.
#[derive(Debug, Clone)]
pub(crate) struct LatticeRow {
    pub fy: i32,
    pub fx_lo: i32,
    pub fx_hi: i32,
    /// offset of this row's first coefficient in the flat arrays
    pub offset: usize,
}

/// Integer frequencies `f ≠ 0` in the half plane (`fy > 0`, or `fy = 0, fx > 0`)
/// whose nearest-integer radius is a valid bin. `|F(−f)| = |F(f)|` for real
/// inputs, so the half plane gives the same annulus averages as the full one.
#[derive(Debug, Clone)]
pub(crate) struct Lattice {
    pub max_freq: i32,
    pub rows: Vec<LatticeRow>,
    pub bin_of: Vec<u16>,
    pub bin_counts: Vec<usize>,
    pub len: usize,
}

impl Lattice {
    pub fn new(bin_count: usize) -> Self {
        let max_freq = bin_count as i32 - 1;
        let limit = bin_count as f64 - 0.5;
        let mut rows = Vec::new();
        let mut bin_of = Vec::new();
        let mut bin_counts = vec![0usize; bin_count];
        let mut offset = 0;
        for fy in 0..=max_freq {
            let mut lo = i32::MAX;
            let mut hi = i32::MIN;
            for fx in -max_freq..=max_freq {
                if fy == 0 && fx <= 0 {
                    continue;
                }
                let r = libm::sqrt((fx * fx + fy * fy) as f64);
                if r < limit {
                    lo = lo.min(fx);
                    hi = hi.max(fx);
                }
            }
            if lo > hi {
                continue;
            }
            for fx in lo..=hi {
                let r = libm::sqrt((fx * fx + fy * fy) as f64);
                let k = libm::round(r) as usize;
                bin_of.push(k as u16);
                bin_counts[k] += 1;
            }
            rows.push(LatticeRow { fy, fx_lo: lo, fx_hi: hi, offset });
            offset += (hi - lo + 1) as usize;
        }
        Self { max_freq, rows, bin_of, bin_counts, len: offset }
    }

    /// `e^{-2πi m x}` for `m ∈ [-K, K]` (x-axis, index `m + K`) and `m ∈ [0, K]`.
    pub fn phasors(&self, p: Point, cx: &mut [(f64, f64)], cy: &mut [(f64, f64)]) {
        let k = self.max_freq as usize;
        let (sx, cxb) = libm::sincos(-TAU * p.x);
        let (sy, cyb) = libm::sincos(-TAU * p.y);
        cx[k] = (1.0, 0.0);
        cy[0] = (1.0, 0.0);
        for m in 1..=k {
            let (re, im) = cx[k + m - 1];
            cx[k + m] = (re * cxb - im * sx, re * sx + im * cxb);
            cx[k - m] = (cx[k + m].0, -cx[k + m].1);
            let (re, im) = cy[m - 1];
            cy[m] = (re * cyb - im * sy, re * sy + im * cyb);
        }
    }

    /// Fourier coefficients `F(f) = Σ_j e^{-2πi f·x_j}` over the lattice.
    pub fn transform(&self, points: &[Point]) -> (Vec<f64>, Vec<f64>) {
        let k = self.max_freq as usize;
        let mut re = vec![0.0; self.len];
        let mut im = vec![0.0; self.len];
        let mut cx = vec![(0.0, 0.0); 2 * k + 1];
        let mut cy = vec![(0.0, 0.0); k + 1];
        let mut cx_re = vec![0.0; 2 * k + 1];
        let mut cx_im = vec![0.0; 2 * k + 1];
        for &p in points {
            self.phasors(p, &mut cx, &mut cy);
            for (i, c) in cx.iter().enumerate() {
                cx_re[i] = c.0;
                cx_im[i] = c.1;
            }
            for row in &self.rows {
                let (a_re, a_im) = cy[row.fy as usize];
                let n = (row.fx_hi - row.fx_lo + 1) as usize;
                let start = (row.fx_lo + self.max_freq) as usize;
                let xr = &cx_re[start..start + n];
                let xi = &cx_im[start..start + n];
                let fr = &mut re[row.offset..row.offset + n];
                let fi = &mut im[row.offset..row.offset + n];
                for t in 0..n {
                    fr[t] += a_re * xr[t] - a_im * xi[t];
                    fi[t] += a_re * xi[t] + a_im * xr[t];
                }
            }
        }
        (re, im)
    }

    /// Annulus-averaged `|F|²/n`; bins without lattice points stay zero.
    pub fn radial_average(&self, re: &[f64], im: &[f64], n: usize, bin_count: usize) -> Vec<f64> {
        let mut sums = vec![0.0; bin_count];
        for i in 0..self.len {
            sums[self.bin_of[i] as usize] += re[i] * re[i] + im[i] * im[i];
        }
        for (k, s) in sums.iter_mut().enumerate() {
            let count = self.bin_counts[k];
            *s = if count == 0 || k == 0 { 0.0 } else { *s / (n as f64 * count as f64) };
        }
        sums
    }
}

/// Radially averaged periodogram of a pattern with `bin_count` bins.
pub fn radial_power_spectrum(pattern: &PointPattern, bin_count: usize) -> Result<RadialPowerSpectrum> {
    if pattern.is_empty() {
        return Err(Error::EmptyPattern);
    }
    if bin_count == 0 {
        return Err(Error::InvalidArgument("bin_count must be at least 1"));
    }
    let lattice = Lattice::new(bin_count);
    let (re, im) = lattice.transform(pattern.points());
    let bins = lattice.radial_average(&re, &im, pattern.len(), bin_count);
    RadialPowerSpectrum::new(bins)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_mode(amplitude: f64, mean: f64, std: f64, floor: f64) -> GmmSpectrumParams {
        GmmSpectrumParams::new(vec![GaussianMode { amplitude, mean, std }], floor).unwrap()
    }

    #[test]
    fn dc_is_zero_for_any_seed() {
        for seed in 0..50 {
            let (_, s) = sample_spectrum(seed);
            assert_eq!(s.bins()[0], 0.0);
            assert_eq!(s.len(), SPECTRUM_BINS);
        }
    }

    #[test]
    fn gaussian_peaks_at_mean() {
        let s = single_mode(2.0, 10.0, 4.0, 0.0).evaluate(SPECTRUM_BINS);
        assert_eq!(s.bins()[10], 2.0);
    }

    #[test]
    fn floor_and_tail_value() {
        // 1 + 2·exp(−(18−10)²/(2·4²)) = 1 + 2·e^{−2}
        let s = single_mode(2.0, 10.0, 4.0, 1.0).evaluate(SPECTRUM_BINS);
        assert!((s.bins()[18] - 1.270_670_566_473_225_4).abs() < 1e-12);
        assert!((s.bins()[18] - 1.2707).abs() < 1e-4);
    }

    #[test]
    fn sampled_parameters_respect_ranges() {
        for (p, s) in sample_spectra(9, 200) {
            assert!(GmmSpectrumParams::new(p.modes().to_vec(), p.floor()).is_ok());
            assert!(s.bins().iter().all(|b| *b >= 0.0));
        }
    }

    #[test]
    fn sampling_is_pure() {
        assert_eq!(sample_spectrum(42), sample_spectrum(42));
        assert_eq!(sample_spectra(42, 3)[0], sample_spectrum(42));
        assert_ne!(sample_spectra(42, 3)[1], sample_spectra(42, 3)[2]);
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        let bad = GmmSpectrumParams::new(vec![GaussianMode { amplitude: 4.0, mean: 1.0, std: 3.0 }], 0.0);
        assert!(bad.is_err());
        assert!(GmmSpectrumParams::new(vec![], 0.0).is_err());
        let ok = GaussianMode { amplitude: 2.0, mean: 1.0, std: 3.0 };
        assert!(GmmSpectrumParams::new(vec![ok], 0.5).is_err());
    }

    #[test]
    fn single_point_spectrum_is_one() {
        let p = PointPattern::new(vec![Point::new(0.3141, 0.2718)]).unwrap();
        let s = radial_power_spectrum(&p, 16).unwrap();
        assert_eq!(s.bins()[0], 0.0);
        for k in 1..16 {
            assert!((s.bins()[k] - 1.0).abs() < 1e-12, "bin {k}: {}", s.bins()[k]);
        }
    }

    #[test]
    fn empty_pattern_is_an_error() {
        assert_eq!(radial_power_spectrum(&PointPattern::empty(), 8), Err(Error::EmptyPattern));
    }

    #[test]
    fn lattice_matches_direct_transform() {
        let pts = [Point::new(0.1, 0.7), Point::new(0.45, 0.2), Point::new(0.9, 0.95)];
        let lattice = Lattice::new(6);
        let (re, im) = lattice.transform(&pts);
        for row in &lattice.rows {
            for fx in row.fx_lo..=row.fx_hi {
                let i = row.offset + (fx - row.fx_lo) as usize;
                let (mut dr, mut di) = (0.0, 0.0);
                for p in &pts {
                    let a = -TAU * (fx as f64 * p.x + row.fy as f64 * p.y);
                    dr += libm::cos(a);
                    di += libm::sin(a);
                }
                assert!((re[i] - dr).abs() < 1e-12 && (im[i] - di).abs() < 1e-12);
            }
        }
    }
}
