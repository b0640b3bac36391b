//! Feature vectors on disk: magic `PCFFEAT1`, the extractor seed (u64), then
//! the values as f32, all little-endian.

use std::path::Path;

use pcfmap_core::features::FeatureVector;

use crate::error::{IoError, Result};
use crate::fsio;

pub const MAGIC: &[u8; 8] = b"PCFFEAT1";

pub fn encode(v: &FeatureVector) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * v.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&v.seed().to_le_bytes());
    v.values().iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<FeatureVector> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(IoError::format(path, "not a feature file"));
    }
    if (bytes.len() - 16) % 4 != 0 {
        return Err(IoError::format(path, "truncated feature data"));
    }
    let seed = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let values = bytes[16..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    FeatureVector::new(seed, values).map_err(|e| IoError::format(path, e.to_string()))
}

pub fn write_features(v: &FeatureVector, path: &Path) -> Result<()> {
    fsio::write_atomic(path, &encode(v))
}

pub fn read_features(path: &Path) -> Result<FeatureVector> {
    decode(&fsio::read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pcfmap_core::features::FEATURE_LEN;

    #[test]
    fn round_trip_is_exact() {
        let v = FeatureVector::new(77, (0..FEATURE_LEN).map(|k| k as f32 * 1e-3).collect()).unwrap();
        let bytes = encode(&v);
        assert_eq!(bytes.len(), 16 + 4 * FEATURE_LEN);
        assert_eq!(decode(&bytes, Path::new("f.bin")).unwrap(), v);
        assert!(decode(&bytes[..bytes.len() - 2], Path::new("f.bin")).is_err());
        assert!(decode(b"PCFFEAT0\0\0\0\0\0\0\0\0", Path::new("f.bin")).is_err());
    }
}
