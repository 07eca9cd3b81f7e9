//! Binary layer files.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "CWRS"
//!      4     4  version (u32 LE) = 1
//!      8     1  dtype (1 = float32)
//!      9     1  kind (1 = matrix, 2 = attention)
//!     10     2  zero padding
//!     12     8  rows (u64 LE)   matrix: words,     attention: sentences
//!     20     8  cols (u64 LE)   matrix: neurons,   attention: heads
//!     28     -  payload, little-endian f32
//! ```
//!
//! A matrix payload is row-major. An attention payload holds, for each
//! sentence in manifest order and each head, the `t_i x t_i` matrix row-major.

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CWRS";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 1;
pub const HEADER_LEN: usize = 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Matrix = 1,
    Attention = 2,
}

impl LayerKind {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            1 => Some(LayerKind::Matrix),
            2 => Some(LayerKind::Attention),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerHeader {
    pub kind: LayerKind,
    pub rows: u64,
    pub cols: u64,
}

/// A layer file as stored: header plus raw `f32` payload.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerFile {
    pub header: LayerHeader,
    pub payload: Vec<f32>,
}

impl LayerFile {
    pub fn matrix(rows: usize, cols: usize, payload: Vec<f32>) -> Self {
        LayerFile {
            header: LayerHeader {
                kind: LayerKind::Matrix,
                rows: rows as u64,
                cols: cols as u64,
            },
            payload,
        }
    }

    pub fn attention(sentences: usize, heads: usize, payload: Vec<f32>) -> Self {
        LayerFile {
            header: LayerHeader {
                kind: LayerKind::Attention,
                rows: sentences as u64,
                cols: heads as u64,
            },
            payload,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.payload.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(DTYPE_F32);
        out.push(self.header.kind as u8);
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&self.header.rows.to_le_bytes());
        out.extend_from_slice(&self.header.cols.to_le_bytes());
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses a whole file. Only the header is validated; the payload length
    /// must be a whole number of floats but is otherwise checked by the
    /// caller, who knows the expected shape.
    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let header = parse_header(path, bytes)?;
        let body = &bytes[HEADER_LEN..];
        if !body.len().is_multiple_of(4) {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                expected: body.len().next_multiple_of(4) as u64,
                found: body.len() as u64,
            });
        }
        let payload = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(LayerFile { header, payload })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(path, &bytes)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Checks the payload holds exactly `expected` floats.
    pub fn expect_len(&self, path: &Path, expected: usize) -> Result<()> {
        let found = self.payload.len();
        if found < expected {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                expected: 4 * expected as u64,
                found: 4 * found as u64,
            });
        }
        if found > expected {
            return Err(Error::DimensionMismatch(format!(
                "{}: {} trailing floats after the declared payload",
                path.display(),
                found - expected
            )));
        }
        Ok(())
    }

    /// Index of the first NaN or infinite payload value.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.payload.iter().position(|v| !v.is_finite())
    }
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<LayerHeader> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let magic = [bytes[0], bytes[1], bytes[2], bytes[3]];
    if magic != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: magic,
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Unsupported {
            path: path.to_path_buf(),
            what: "format version",
            found: version as u64,
        });
    }
    if bytes[8] != DTYPE_F32 {
        return Err(Error::Unsupported {
            path: path.to_path_buf(),
            what: "dtype",
            found: bytes[8] as u64,
        });
    }
    let kind = LayerKind::from_byte(bytes[9]).ok_or(Error::Unsupported {
        path: path.to_path_buf(),
        what: "layer kind",
        found: bytes[9] as u64,
    })?;
    if bytes[10] != 0 || bytes[11] != 0 {
        return Err(Error::Unsupported {
            path: path.to_path_buf(),
            what: "header padding",
            found: u16::from_le_bytes([bytes[10], bytes[11]]) as u64,
        });
    }
    let rows = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
    Ok(LayerHeader { kind, rows, cols })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_bit_exact() {
        let f = LayerFile::matrix(2, 1, vec![1.0, -2.5]);
        let bytes = f.to_bytes();
        let mut expected = b"CWRS".to_vec();
        expected.extend_from_slice(&[1, 0, 0, 0, 1, 1, 0, 0]);
        expected.extend_from_slice(&[2, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&[1, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-2.5f32).to_le_bytes());
        assert_eq!(bytes, expected);
        let back = LayerFile::from_bytes(Path::new("x"), &bytes).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_bad_headers() {
        let p = Path::new("x");
        let good = LayerFile::attention(1, 1, vec![1.0]).to_bytes();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(LayerFile::from_bytes(p, &bad), Err(Error::BadMagic { .. })));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(
            LayerFile::from_bytes(p, &bad),
            Err(Error::Unsupported { what: "format version", .. })
        ));

        let mut bad = good.clone();
        bad[9] = 7;
        assert!(matches!(LayerFile::from_bytes(p, &bad), Err(Error::Unsupported { .. })));

        assert!(matches!(
            LayerFile::from_bytes(p, &good[..10]),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(
            LayerFile::from_bytes(p, &good[..good.len() - 1]),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn expect_len_classifies() {
        let p = Path::new("x");
        let f = LayerFile::matrix(2, 2, vec![0.0; 3]);
        assert!(matches!(f.expect_len(p, 4), Err(Error::Truncated { .. })));
        assert!(matches!(f.expect_len(p, 2), Err(Error::DimensionMismatch(_))));
        assert!(f.expect_len(p, 3).is_ok());
    }
}
