//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rustfft::FftNum;
use serde::{Deserialize, Serialize};

/// On-disk element type tag used by the feature cache and checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn code(self) -> u32 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Dtype::F32),
            1 => Some(Dtype::F64),
            _ => None,
        }
    }

    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// f32 or f64.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + 'static
{
    const DTYPE: Dtype;

    fn write_le(self, out: &mut Vec<u8>);

    /// `bytes` must hold exactly `DTYPE.width()` bytes.
    fn read_le(bytes: &[u8]) -> Self;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {
    const DTYPE: Dtype = Dtype::F32;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        let mut b = [0u8; 4];
        b.copy_from_slice(bytes);
        f32::from_le_bytes(b)
    }
}

impl Scalar for f64 {
    const DTYPE: Dtype = Dtype::F64;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        let mut b = [0u8; 8];
        b.copy_from_slice(bytes);
        f64::from_le_bytes(b)
    }
}

/// Decode a little-endian buffer written with [`Scalar::write_le`] under `dtype`,
/// converting to `S` when the widths differ.
pub fn decode_le<S: Scalar>(bytes: &[u8], dtype: Dtype) -> Vec<S> {
    match dtype {
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|c| S::from_f32(f32::read_le(c)).unwrap_or_else(S::nan))
            .collect(),
        Dtype::F64 => bytes
            .chunks_exact(8)
            .map(|c| S::from_f64(f64::read_le(c)).unwrap_or_else(S::nan))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn le_roundtrip_both_widths() {
        let mut buf = Vec::new();
        1.5f32.write_le(&mut buf);
        (-2.25f32).write_le(&mut buf);
        assert_eq!(decode_le::<f32>(&buf, Dtype::F32), vec![1.5, -2.25]);
        assert_eq!(decode_le::<f64>(&buf, Dtype::F32), vec![1.5, -2.25]);

        let mut buf = Vec::new();
        std::f64::consts::PI.write_le(&mut buf);
        assert_eq!(decode_le::<f64>(&buf, Dtype::F64), vec![std::f64::consts::PI]);
    }

    #[test]
    fn dtype_codes() {
        for d in [Dtype::F32, Dtype::F64] {
            assert_eq!(Dtype::from_code(d.code()), Some(d));
        }
        assert_eq!(Dtype::from_code(9), None);
    }
}
