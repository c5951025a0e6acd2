//! Binary basis files with a JSON sidecar.
//!
//! Layout: magic `RBM1`, `u64` rows, `u64` cols (little endian), then
//! `rows × cols` little-endian `f64` values in column-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rom::pod::ReducedBasis;
use crate::time::HhtParams;

const MAGIC: &[u8; 4] = b"RBM1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisMetadata {
    pub problem_hash: String,
    pub dt: f64,
    pub n_steps: usize,
    pub hht: HhtParams,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_matrix<W: Write>(mut out: W, m: &DMatrix<f64>) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(m.nrows() as u64).to_le_bytes())?;
    out.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for v in m.iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut input: R) -> Result<DMatrix<f64>> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("matrix size overflows".into()))?;
    let mut values = Vec::with_capacity(count.min(1 << 28));
    for _ in 0..count {
        input
            .read_exact(&mut word)
            .map_err(|_| Error::Format(format!("truncated matrix data ({rows}×{cols})")))?;
        values.push(f64::from_le_bytes(word));
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", rest.len())));
    }
    Ok(DMatrix::from_vec(rows, cols, values))
}

pub fn save_basis(path: &Path, basis: &ReducedBasis, meta: &BasisMetadata) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_matrix(&mut out, basis.matrix())?;
    out.flush()?;
    let side = BufWriter::new(File::create(sidecar_path(path))?);
    serde_json::to_writer_pretty(side, meta)?;
    Ok(())
}

pub fn load_basis(path: &Path) -> Result<(ReducedBasis, BasisMetadata)> {
    let m = read_matrix(BufReader::new(File::open(path)?))?;
    let meta: BasisMetadata =
        serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
    Ok((ReducedBasis::new(m)?, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_layout() {
        let basis = ReducedBasis::identity(3).truncated(2).unwrap();
        let meta = BasisMetadata {
            problem_hash: "abc".into(),
            dt: 0.01,
            n_steps: 10,
            hht: HhtParams::default(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.rbm");
        save_basis(&path, &basis, &meta).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"RBM1");
        assert_eq!(u64::from_le_bytes(bytes[4..12].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 2);
        assert_eq!(bytes.len(), 20 + 6 * 8);
        // column-major: entry 1 is (1, 0), entry 4 is (1, 1)
        assert_eq!(f64::from_le_bytes(bytes[28..36].try_into().unwrap()), 0.0);
        assert_eq!(f64::from_le_bytes(bytes[52..60].try_into().unwrap()), 1.0);
        let (back, m) = load_basis(&path).unwrap();
        assert_eq!(back, basis);
        assert_eq!(m, meta);
    }

    #[test]
    fn rejects_corrupt_files() {
        assert!(read_matrix(&b"XXXX"[..]).is_err());
        let mut buf = Vec::new();
        write_matrix(&mut buf, &DMatrix::from_element(2, 2, 1.5)).unwrap();
        assert!(read_matrix(&buf[..buf.len() - 3]).is_err());
        buf.push(0);
        assert!(read_matrix(&buf[..]).is_err());
    }
}
