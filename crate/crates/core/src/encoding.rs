//! Small serialization helpers shared by the dataset and model file formats.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Formats `x` rounded to 9 significant digits, using the shortest decimal
/// string that reads back as that rounded value.
pub(crate) fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    let a = rounded.abs();
    if (1e-5..1e15).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

pub(crate) fn encode_f64s(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    STANDARD.encode(bytes)
}

pub(crate) fn decode_f64s(text: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| Error::data(format!("bad base64 float array: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::data(format!(
            "float array byte length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Row-major matrix of little-endian f64 values, base64 encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct EncodedMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: String,
}

impl EncodedMatrix {
    pub fn new(rows: usize, cols: usize, values: &[f64]) -> Self {
        debug_assert_eq!(rows * cols, values.len());
        EncodedMatrix {
            rows,
            cols,
            data: encode_f64s(values),
        }
    }

    pub fn decode(&self) -> Result<Vec<f64>> {
        let values = decode_f64s(&self.data)?;
        if values.len() != self.rows * self.cols {
            return Err(Error::data(format!(
                "matrix declares {}x{} but holds {} values",
                self.rows,
                self.cols,
                values.len()
            )));
        }
        Ok(values)
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sig9_examples() {
        assert_eq!(format_sig9(5.0), "5");
        assert_eq!(format_sig9(0.5), "0.5");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(123456789012.0), "123456789000");
        assert_eq!(format_sig9(-2.5e-9), "-2.5e-9");
        assert_eq!(format_sig9(25000.0), "25000");
    }

    proptest! {
        #[test]
        fn sig9_is_idempotent_and_close(x in -1e12f64..1e12) {
            let s = format_sig9(x);
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(format_sig9(back), s);
            prop_assert!((back - x).abs() <= 5.000001e-9 * x.abs().max(1e-300));
        }

        #[test]
        fn base64_round_trip(v in proptest::collection::vec(any::<f64>(), 0..40)) {
            let back = decode_f64s(&encode_f64s(&v)).unwrap();
            prop_assert_eq!(back.len(), v.len());
            for (a, b) in v.iter().zip(&back) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
