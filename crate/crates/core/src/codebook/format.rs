//! Binary feature (`SEMF`) and codebook (`SEMC`) files.
//!
//! Both share one layout, all integers and floats little-endian:
//!
//! ```text
//! magic    [u8; 4]   "SEMF" or "SEMC"
//! version  u16       currently 1
//! rows     u32       M (features) or K (codewords)
//! dim      u32       N
//! values   f32 * rows * dim, row-major
//! ```
//!
//! Values are held as `f64` in memory and narrowed to `f32` on write, so a
//! write/read round trip is exact for anything already at `f32` precision.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Codebook, FeatureSet};
use crate::error::{Error, Result};

pub const FEATURES_MAGIC: [u8; 4] = *b"SEMF";
pub const CODEBOOK_MAGIC: [u8; 4] = *b"SEMC";
pub const FORMAT_VERSION: u16 = 1;

fn write_matrix<W: Write>(
    mut w: W,
    magic: [u8; 4],
    rows: usize,
    dim: usize,
    values: &[f64],
) -> Result<()> {
    let kind = if magic == FEATURES_MAGIC { "SEMF" } else { "SEMC" };
    let rows = u32::try_from(rows).map_err(|_| Error::Format {
        kind,
        reason: "row count exceeds u32".into(),
    })?;
    let dim = u32::try_from(dim).map_err(|_| Error::Format {
        kind,
        reason: "dimension exceeds u32".into(),
    })?;
    w.write_all(&magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&dim.to_le_bytes())?;
    for &v in values {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_matrix<R: Read>(mut r: R, magic: [u8; 4], kind: &'static str) -> Result<(Vec<f64>, usize)> {
    let bad = |reason: &str| Error::Format {
        kind,
        reason: reason.to_string(),
    };
    let mut head = [0u8; 14];
    r.read_exact(&mut head)
        .map_err(|_| bad("truncated header"))?;
    if head[..4] != magic {
        return Err(bad("wrong magic bytes"));
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != FORMAT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let rows = u32::from_le_bytes(head[6..10].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(head[10..14].try_into().unwrap()) as usize;
    let count = rows
        .checked_mul(dim)
        .ok_or_else(|| bad("size overflow"))?;
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes)
        .map_err(|_| bad("truncated payload"))?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(bad("trailing bytes after payload"));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    Ok((values, dim))
}

pub fn write_features<W: Write>(w: W, features: &FeatureSet) -> Result<()> {
    write_matrix(w, FEATURES_MAGIC, features.len(), features.dim(), features.as_flat())
}

pub fn read_features<R: Read>(r: R, source: impl Into<String>) -> Result<FeatureSet> {
    let (values, dim) = read_matrix(r, FEATURES_MAGIC, "SEMF")?;
    FeatureSet::from_flat(values, dim, source)
}

pub fn write_codebook<W: Write>(w: W, codebook: &Codebook) -> Result<()> {
    write_matrix(w, CODEBOOK_MAGIC, codebook.size(), codebook.dim(), codebook.as_flat())
}

pub fn read_codebook<R: Read>(r: R) -> Result<Codebook> {
    let (values, dim) = read_matrix(r, CODEBOOK_MAGIC, "SEMC")?;
    Codebook::from_flat(values, dim)
}

impl FeatureSet {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = BufReader::new(File::open(path)?);
        read_features(file, path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_features(BufWriter::new(File::create(path)?), self)
    }
}

impl Codebook {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_codebook(BufReader::new(File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_codebook(BufWriter::new(File::create(path)?), self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_bit_exact() {
        let c = Codebook::from_rows(vec![vec![1.0, -2.0], vec![0.5, 3.25]]).unwrap();
        let mut buf = Vec::new();
        write_codebook(&mut buf, &c).unwrap();
        assert_eq!(&buf[..4], b"SEMC");
        assert_eq!(&buf[4..6], &[1, 0]);
        assert_eq!(&buf[6..10], &[2, 0, 0, 0]);
        assert_eq!(&buf[10..14], &[2, 0, 0, 0]);
        assert_eq!(&buf[14..18], &1.0f32.to_le_bytes());
        assert_eq!(&buf[18..22], &(-2.0f32).to_le_bytes());
        assert_eq!(buf.len(), 14 + 4 * 4);
    }

    #[test]
    fn rejects_malformed_input() {
        let z = FeatureSet::from_rows(vec![vec![1.0, 2.0]], "t").unwrap();
        let mut buf = Vec::new();
        write_features(&mut buf, &z).unwrap();
        assert!(read_codebook(buf.as_slice()).is_err());
        assert!(read_features(&buf[..buf.len() - 1], "t").is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_features(extra.as_slice(), "t").is_err());
        let mut versioned = buf.clone();
        versioned[4] = 9;
        assert!(read_features(versioned.as_slice(), "t").is_err());
        assert!(read_features(&buf[..3], "t").unwrap_err().is_io());
    }

    proptest! {
        #[test]
        fn f32_values_round_trip_exactly(
            values in prop::collection::vec(-1.0e6f32..1.0e6, 1..64),
            dim in 1usize..4,
        ) {
            let rows = values.len() / dim;
            prop_assume!(rows >= 2);
            let data: Vec<f64> = values[..rows * dim].iter().map(|&v| v as f64).collect();
            let z = FeatureSet::from_flat(data.clone(), dim, "p").unwrap();
            let mut buf = Vec::new();
            write_features(&mut buf, &z).unwrap();
            let back = read_features(buf.as_slice(), "p").unwrap();
            prop_assert_eq!(back.as_flat(), data.as_slice());
            let c = Codebook::from_flat(data.clone(), dim).unwrap();
            let mut buf = Vec::new();
            write_codebook(&mut buf, &c).unwrap();
            prop_assert_eq!(read_codebook(buf.as_slice()).unwrap(), c);
        }
    }
}
