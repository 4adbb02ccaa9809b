//! `EMBF` binary embeddings.
//!
//! ```text
//! offset  size   field
//! 0       4      magic "EMBF"
//! 4       4      version, u32 LE (= 1)
//! 8       8      n, u64 LE
//! 16      4      d, u32 LE
//! 20      4·n·d  payload, f32 LE, row-major
//! end     8      checksum: sum of payload bytes mod 2^64, u64 LE
//! ```

use std::fs;
use std::path::Path;

use crate::numerics::{FeatureMatrix, Matrix};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMBF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;
pub const CHECKSUM_LEN: usize = 8;

/// Raw contents of an embedding file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub n: u64,
    pub d: u32,
    pub data: Vec<f32>,
}

impl EmbeddingFile {
    pub fn new(n: u64, d: u32, data: Vec<f32>) -> Result<Self> {
        let expected = n as usize * d as usize;
        if data.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: data.len() });
        }
        Ok(EmbeddingFile { n, d, data })
    }

    /// Rounds every value to f32.
    pub fn from_matrix(x: &Matrix) -> Self {
        EmbeddingFile {
            n: x.rows() as u64,
            d: x.cols() as u32,
            data: x.as_slice().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        Matrix::from_vec(self.n as usize, self.d as usize, self.data.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn payload(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload = self.payload();
        let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + CHECKSUM_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&self.d.to_le_bytes());
        out.extend_from_slice(&payload);
        out.extend_from_slice(&checksum(&payload).to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |m: String| Err(Error::Format(m));
        if bytes.len() < HEADER_LEN {
            return fail(format!("truncated header: expected {HEADER_LEN} bytes, found {}", bytes.len()));
        }
        if &bytes[0..4] != MAGIC {
            return fail(format!("bad magic: expected \"EMBF\", found {:?}", String::from_utf8_lossy(&bytes[0..4])));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return fail(format!("unsupported version: expected {VERSION}, found {version}"));
        }
        let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let d = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
        let expected = (n as u128) * (d as u128) * 4;
        let available = bytes.len() - HEADER_LEN;
        if (available as u128) < expected {
            return fail(format!("truncated payload: expected {expected} bytes, found {available}"));
        }
        let expected = expected as usize;
        let payload = &bytes[HEADER_LEN..HEADER_LEN + expected];
        let footer = &bytes[HEADER_LEN + expected..];
        if footer.len() < CHECKSUM_LEN {
            return fail(format!("truncated checksum: expected {CHECKSUM_LEN} bytes, found {}", footer.len()));
        }
        if footer.len() > CHECKSUM_LEN {
            return fail(format!("trailing data: {} unexpected bytes after checksum", footer.len() - CHECKSUM_LEN));
        }
        let stored = u64::from_le_bytes(footer.try_into().unwrap());
        let computed = checksum(payload);
        if stored != computed {
            return fail(format!("checksum mismatch: stored {stored}, computed {computed}"));
        }
        let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(EmbeddingFile { n, d, data })
    }
}

/// Sum of bytes modulo 2^64.
pub fn checksum(payload: &[u8]) -> u64 {
    payload.iter().fold(0u64, |acc, &b| acc.wrapping_add(u64::from(b)))
}

pub fn write_embedding_file(path: &Path, file: &EmbeddingFile) -> Result<()> {
    fs::write(path, file.to_bytes())?;
    Ok(())
}

pub fn read_embedding_file(path: &Path) -> Result<EmbeddingFile> {
    EmbeddingFile::from_bytes(&fs::read(path)?)
}

/// Write the rows of `x`, rounded to f32. Ids are not stored; row `i` is
/// read back as id `i`.
pub fn write_embeddings(path: &Path, x: &Matrix) -> Result<()> {
    write_embedding_file(path, &EmbeddingFile::from_matrix(x))
}

/// Rows with ids `0..n`.
pub fn read_embeddings(path: &Path) -> Result<FeatureMatrix> {
    let file = read_embedding_file(path)?;
    if file.n == 0 || file.d == 0 {
        return Err(Error::Format(format!("empty embedding file: n = {}, d = {}", file.n, file.d)));
    }
    FeatureMatrix::with_sequential_ids(file.to_matrix()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EmbeddingFile {
        EmbeddingFile::new(3, 2, vec![1.0, -2.5, 0.0, 3.25, 1e-7, -0.0]).unwrap()
    }

    #[test]
    fn round_trip() {
        let f = sample();
        let bytes = f.to_bytes();
        assert_eq!(bytes.len(), 20 + 24 + 8);
        let back = EmbeddingFile::from_bytes(&bytes).unwrap();
        assert_eq!(back.payload(), f.payload());
        assert_eq!(back, f);
    }

    #[test]
    fn layout_is_little_endian() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[0..4], b"EMBF");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..16], &[3, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &[2, 0, 0, 0]);
        assert_eq!(&bytes[20..24], &1.0f32.to_le_bytes());
    }

    fn error(bytes: &[u8]) -> String {
        EmbeddingFile::from_bytes(bytes).unwrap_err().to_string()
    }

    #[test]
    fn corruption_diagnostics() {
        let good = sample().to_bytes();
        assert!(error(&good[..40]).contains("truncated payload: expected 24 bytes, found 20"));
        assert!(error(&good[..10]).contains("truncated header"));
        assert!(error(&good[..48]).contains("truncated checksum"));
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(error(&bad).contains("bad magic"));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(error(&bad).contains("unsupported version: expected 1, found 2"));
        let mut bad = good.clone();
        bad[25] ^= 0x10;
        assert!(error(&bad).contains("checksum mismatch"));
        let mut bad = good;
        bad.push(0);
        assert!(error(&bad).contains("trailing data"));
    }
}
