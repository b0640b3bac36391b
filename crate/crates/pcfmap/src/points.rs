//! Point CSV: header `x,y` or `x,y,r`, one point per line, 9 significant
//! digits in fixed notation.

use std::path::Path;

use pcfmap_core::{Point, PointPattern};

use crate::error::{IoError, Result};
use crate::fsio;

/// `x` with 9 significant digits and no exponent.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { format!("{x}") };
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (8 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn to_csv(pattern: &PointPattern) -> String {
    let mut out = String::with_capacity(32 * (pattern.len() + 1));
    match pattern.radii() {
        Some(radii) => {
            out.push_str("x,y,r\n");
            for (p, r) in pattern.points().iter().zip(radii) {
                out.push_str(&format!("{},{},{}\n", format_sig9(p.x), format_sig9(p.y), format_sig9(*r)));
            }
        }
        None => {
            out.push_str("x,y\n");
            for p in pattern.points() {
                out.push_str(&format!("{},{}\n", format_sig9(p.x), format_sig9(p.y)));
            }
        }
    }
    out
}

pub fn write_points(pattern: &PointPattern, path: &Path) -> Result<()> {
    fsio::write_atomic(path, to_csv(pattern).as_bytes())
}

pub fn parse_csv(text: &str, path: &Path) -> Result<PointPattern> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| IoError::format(path, e.to_string()))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let with_radii = match names.as_slice() {
        ["x", "y"] => false,
        ["x", "y", "r"] => true,
        _ => return Err(IoError::format(path, format!("expected header x,y[,r], got {}", names.join(",")))),
    };
    let mut points = Vec::new();
    let mut radii = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IoError::format(path, e.to_string()))?;
        let field = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| IoError::format(path, format!("line {}: bad number in column {}", line + 2, i + 1)))
        };
        points.push(Point::new(field(0)?, field(1)?));
        if with_radii {
            radii.push(field(2)?);
        }
    }
    let pattern = if with_radii { PointPattern::with_radii(points, radii) } else { PointPattern::new(points) };
    pattern.map_err(|e| IoError::format(path, e.to_string()))
}

pub fn read_points(path: &Path) -> Result<PointPattern> {
    let bytes = fsio::read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| IoError::format(path, "not UTF-8"))?;
    parse_csv(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig9(0.5), "0.500000000");
        assert_eq!(format_sig9(0.123456789123), "0.123456789");
        assert_eq!(format_sig9(0.00123456789123), "0.00123456789");
        assert_eq!(format_sig9(1.0), "1.00000000");
        assert_eq!(format_sig9(0.0), "0");
    }

    #[test]
    fn header_follows_radii() {
        let p = PointPattern::new(vec![Point::new(0.25, 0.75)]).unwrap();
        assert_eq!(to_csv(&p), "x,y\n0.250000000,0.750000000\n");
        let q = PointPattern::with_radii(vec![Point::new(0.25, 0.75)], vec![0.002]).unwrap();
        assert!(to_csv(&q).starts_with("x,y,r\n"));
    }

    #[test]
    fn rejects_foreign_headers() {
        assert!(parse_csv("a,b\n1,2\n", Path::new("p.csv")).is_err());
        assert!(parse_csv("x,y\n0.1,zz\n", Path::new("p.csv")).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_within_nine_digits(coords in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..50)) {
            let p = PointPattern::new(coords.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap();
            let back = parse_csv(&to_csv(&p), Path::new("p.csv")).unwrap();
            prop_assert_eq!(back.len(), p.len());
            for (a, b) in p.points().iter().zip(back.points()) {
                prop_assert!((a.x - b.x).abs() <= 1e-9 * a.x.abs().max(1e-9) * 10.0);
                prop_assert!((a.y - b.y).abs() <= 1e-9 * a.y.abs().max(1e-9) * 10.0);
            }
            // writing what was read gives the same bytes
            prop_assert_eq!(to_csv(&back), to_csv(&p));
        }
    }
}
