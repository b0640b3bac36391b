//! Binary palette file, little-endian throughout:
//!
//! ```text
//! magic "PSHP" | version u16 | basis count u32 | feature seed u64
//! per basis entry:
//!     u f64 | v f64 | learning rate f64
//!     bin count u32 | pcf bins f64 × bin count
//!     feature length u32 | features f32 × feature length
//! lut f32 × 256·256·bins
//! learning-rate table f32 × 256·256
//! ```

use std::path::Path;

use pcfmap_core::embedding::LatentCoordinate;
use pcfmap_core::features::FeatureVector;
use pcfmap_core::palette::{BasisEntry, Palette, LUT_SIZE};
use pcfmap_core::pcf::Pcf;

use crate::error::{IoError, Result};
use crate::fsio;

pub const MAGIC: &[u8; 4] = b"PSHP";
pub const VERSION: u16 = 1;

pub fn encode(palette: &Palette) -> Result<Vec<u8>> {
    let (lut, lr) = match (palette.lut(), palette.lr_table()) {
        (Some(l), Some(r)) => (l, r),
        _ => return Err(pcfmap_core::Error::LutMissing.into()),
    };
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(palette.basis().len() as u32).to_le_bytes());
    out.extend_from_slice(&palette.feature_seed().to_le_bytes());
    for e in palette.basis() {
        for x in [e.latent.u, e.latent.v, e.learning_rate] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.extend_from_slice(&(e.pcf.len() as u32).to_le_bytes());
        e.pcf.bins().iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        out.extend_from_slice(&(e.features.values().len() as u32).to_le_bytes());
        e.features.values().iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    }
    lut.iter().chain(lr).for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| IoError::format(self.path, format!("truncated at byte {}", self.at)))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.array()?) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| IoError::format(self.path, "length overflow"))?)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4"))).collect())
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Palette> {
    let mut r = Reader { bytes, at: 0, path };
    if r.take(4)? != MAGIC {
        return Err(IoError::format(path, "not a palette file"));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(IoError::format(path, format!("unsupported palette version {version}")));
    }
    let count = r.u32()?;
    let feature_seed = r.u64()?;
    let bad = |e: pcfmap_core::Error| IoError::format(path, e.to_string());
    let mut basis = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let (u, v, learning_rate) = (r.f64()?, r.f64()?, r.f64()?);
        let bins = r.u32()?;
        let pcf = (0..bins).map(|_| r.f64()).collect::<Result<Vec<f64>>>()?;
        let len = r.u32()?;
        let features = r.f32s(len)?;
        basis.push(BasisEntry {
            pcf: Pcf::new(pcf).map_err(bad)?,
            latent: LatentCoordinate::new(u, v).map_err(bad)?,
            features: FeatureVector::new(feature_seed, features).map_err(bad)?,
            learning_rate,
        });
    }
    let palette = Palette::new(basis, feature_seed).map_err(bad)?;
    let cells = LUT_SIZE * LUT_SIZE;
    let lut = r.f32s(cells * palette.bin_count())?;
    let lr = r.f32s(cells)?;
    if r.at != bytes.len() {
        return Err(IoError::format(path, "trailing bytes"));
    }
    palette.with_tables(lut, lr).map_err(bad)
}

pub fn write_palette(palette: &Palette, path: &Path) -> Result<()> {
    fsio::write_atomic(path, &encode(palette)?)
}

pub fn read_palette(path: &Path) -> Result<Palette> {
    decode(&fsio::read(path)?, path)
}
