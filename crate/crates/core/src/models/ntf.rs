//! NTF1 tensor files.
//!
//! Layout, all little-endian: magic `NTF1`, rank as `u32`, each dimension as
//! `u64`, then the row-major `f64` payload.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

pub const MAGIC: &[u8; 4] = b"NTF1";

#[derive(Debug, thiserror::Error)]
pub enum NtfError {
    #[error("bad magic, not an NTF1 tensor")]
    BadMagic,
    #[error("tensor header declares {declared} values but payload holds {actual}")]
    Truncated { declared: usize, actual: usize },
    #[error("trailing bytes after tensor payload")]
    TrailingBytes,
    #[error("tensor dimensions overflow")]
    Overflow,
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_tensor<W: Write>(mut w: W, tensor: &ArrayD<f64>) -> Result<(), NtfError> {
    w.write_all(MAGIC)?;
    w.write_all(&(tensor.ndim() as u32).to_le_bytes())?;
    for &dim in tensor.shape() {
        w.write_all(&(dim as u64).to_le_bytes())?;
    }
    // iter() walks in logical row-major order regardless of memory layout
    for v in tensor.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<ArrayD<f64>, NtfError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn decode(bytes: &[u8]) -> Result<ArrayD<f64>, NtfError> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(NtfError::BadMagic);
    }
    let rank = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let header = 8usize
        .checked_add(rank.checked_mul(8).ok_or(NtfError::Overflow)?)
        .ok_or(NtfError::Overflow)?;
    if bytes.len() < header {
        return Err(NtfError::Truncated {
            declared: header,
            actual: bytes.len(),
        });
    }
    let mut shape = Vec::with_capacity(rank);
    let mut count: usize = 1;
    for i in 0..rank {
        let off = 8 + 8 * i;
        let dim = u64::from_le_bytes(bytes[off..off + 8].try_into().expect("8 bytes"));
        let dim = usize::try_from(dim).map_err(|_| NtfError::Overflow)?;
        count = count.checked_mul(dim).ok_or(NtfError::Overflow)?;
        shape.push(dim);
    }
    let payload = &bytes[header..];
    let actual = payload.len() / 8;
    if actual < count {
        return Err(NtfError::Truncated {
            declared: count,
            actual,
        });
    }
    if payload.len() != count * 8 {
        return Err(NtfError::TrailingBytes);
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(ArrayD::from_shape_vec(IxDyn(&shape), data).expect("count matches shape"))
}

pub fn save(path: &Path, tensor: &ArrayD<f64>) -> Result<(), NtfError> {
    let mut buf = Vec::with_capacity(8 + 8 * tensor.ndim() + 8 * tensor.len());
    write_tensor(&mut buf, tensor)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ArrayD<f64>, NtfError> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn exact_byte_layout() {
        let t = array![[1.0, 2.0], [3.0, 4.5]].into_dyn();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        let mut want = b"NTF1".to_vec();
        want.extend_from_slice(&2u32.to_le_bytes());
        want.extend_from_slice(&2u64.to_le_bytes());
        want.extend_from_slice(&2u64.to_le_bytes());
        for v in [1.0f64, 2.0, 3.0, 4.5] {
            want.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(buf, want);
    }

    #[test]
    fn transposed_view_is_written_row_major() {
        let t = array![[1.0, 2.0], [3.0, 4.0]].reversed_axes().into_dyn();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        let back = decode(&buf).unwrap();
        assert_eq!(back.iter().copied().collect::<Vec<_>>(), vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(matches!(decode(b"NTF2\0\0\0\0"), Err(NtfError::BadMagic)));
        let t = array![1.0, 2.0, 3.0].into_dyn();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert!(matches!(decode(&buf[..buf.len() - 8]), Err(NtfError::Truncated { .. })));
        buf.push(0);
        assert!(matches!(decode(&buf), Err(NtfError::TrailingBytes)));
    }

    #[test]
    fn scalar_has_rank_zero() {
        let t = ndarray::arr0(2.5).into_dyn();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8);
        assert_eq!(decode(&buf).unwrap(), t);
    }

    proptest! {
        #[test]
        fn round_trip(rows in 0usize..5, cols in 0usize..5, seed in any::<u64>()) {
            let data: Vec<f64> = (0..rows * cols)
                .map(|i| f64::from_bits(seed.wrapping_mul(i as u64 + 1) >> 2))
                .collect();
            let t = ArrayD::from_shape_vec(IxDyn(&[rows, cols]), data).unwrap();
            let mut buf = Vec::new();
            write_tensor(&mut buf, &t).unwrap();
            let back = decode(&buf).unwrap();
            prop_assert_eq!(back.shape(), t.shape());
            for (a, b) in back.iter().zip(t.iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
