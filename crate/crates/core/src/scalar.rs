//! Floating point abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the whole pipeline is generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Width of the little-endian encoding.
    const BYTES: usize;
    const NAME: &'static str;

    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;

    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {
    const BYTES: usize = 4;
    const NAME: &'static str = "f32";

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes[..4].try_into().expect("4 bytes"))
    }
}

impl Scalar for f64 {
    const BYTES: usize = 8;
    const NAME: &'static str = "f64";

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"))
    }
}

/// Converts between scalar widths through `f64`.
#[inline]
pub fn cast<A: Scalar, B: Scalar>(v: A) -> B {
    B::lit(v.as_f64())
}

/// Encodes a slice as packed little-endian bytes.
pub fn to_le_bytes<S: Scalar>(values: &[S]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * S::BYTES);
    for &v in values {
        v.write_le(&mut out);
    }
    out
}

/// Decodes packed little-endian bytes; `None` if the length is not a multiple of the width.
pub fn from_le_bytes<S: Scalar>(bytes: &[u8]) -> Option<Vec<S>> {
    if !bytes.len().is_multiple_of(S::BYTES) {
        return None;
    }
    Some(bytes.chunks_exact(S::BYTES).map(S::read_le).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn le_round_trip() {
        let v = vec![1.5f32, -0.25, f32::MAX];
        let bytes = to_le_bytes(&v);
        assert_eq!(bytes.len(), 12);
        assert_eq!(from_le_bytes::<f32>(&bytes).unwrap(), v);
        assert!(from_le_bytes::<f64>(&bytes[..7]).is_none());
    }

    #[test]
    fn cast_widths() {
        let x: f64 = cast(0.5f32);
        assert_eq!(x, 0.5);
        assert_eq!(f32::lit(0.25), 0.25);
    }
}
