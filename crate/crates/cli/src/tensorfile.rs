//! Binary tensor container.
//!
//! Layout: `"MPP1"`, then `n`, `p`, `q` as little-endian `u32`, then
//! `n·p·q` little-endian `f64` values (observation-major, row-major within
//! an observation), then optionally `"LBL1"` followed by `n` label bytes.

use std::path::Path;

use mpp_core::MatrixSample;

use crate::error::{CliError, CliResult};

const MAGIC: &[u8; 4] = b"MPP1";
const LABEL_MAGIC: &[u8; 4] = b"LBL1";
const HEADER_LEN: usize = 16;

pub fn encode(sample: &MatrixSample) -> CliResult<Vec<u8>> {
    let dims = [sample.n(), sample.p(), sample.q()];
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * sample.data().len() + 4 + sample.n());
    out.extend_from_slice(MAGIC);
    for d in dims {
        let d = u32::try_from(d).map_err(|_| CliError::Usage(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for x in sample.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    if let Some(labels) = sample.labels() {
        out.extend_from_slice(LABEL_MAGIC);
        out.extend_from_slice(labels);
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> CliResult<MatrixSample> {
    let bad = |msg: String| CliError::Io(format!("malformed tensor file: {msg}"));
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(bad("missing MPP1 header".into()));
    }
    let dim = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().expect("4 bytes")) as usize;
    let (n, p, q) = (dim(0), dim(1), dim(2));
    let payload = n
        .checked_mul(p)
        .and_then(|x| x.checked_mul(q))
        .and_then(|x| x.checked_mul(8))
        .ok_or_else(|| bad("dimensions overflow".into()))?;
    let end = HEADER_LEN + payload;
    let labels = if bytes.len() == end {
        None
    } else if bytes.len() == end + 4 + n && &bytes[end..end + 4] == LABEL_MAGIC {
        Some(bytes[end + 4..].to_vec())
    } else {
        return Err(bad(format!("length {} does not match {n}x{p}x{q}", bytes.len())));
    };
    let data = bytes[HEADER_LEN..end]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    MatrixSample::new(n, p, q, data, labels).map_err(|e| bad(e.to_string()))
}

pub fn write(path: &Path, sample: &MatrixSample) -> CliResult<()> {
    std::fs::write(path, encode(sample)?).map_err(|e| CliError::io(path, e))
}

pub fn read(path: &Path) -> CliResult<MatrixSample> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_and_round_trip() {
        let s = MatrixSample::new(2, 2, 3, (0..12).map(f64::from).collect(), Some(vec![1, 2])).unwrap();
        let bytes = encode(&s).unwrap();
        assert_eq!(bytes.len(), 4 + 12 + 8 * 12 + 4 + 2);
        assert_eq!(decode(&bytes).unwrap(), s);
        let unlabeled = s.clone().with_labels(None).unwrap();
        let bytes = encode(&unlabeled).unwrap();
        assert_eq!(bytes.len(), 16 + 96);
        assert_eq!(decode(&bytes).unwrap(), unlabeled);
    }

    #[test]
    fn rejects_truncation_and_bad_magic() {
        let s = MatrixSample::new(2, 1, 1, vec![1.0, 2.0], None).unwrap();
        let bytes = encode(&s).unwrap();
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(decode(&wrong).is_err());
    }
}
