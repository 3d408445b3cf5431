//! Byte run-length coding: a sequence of `(varint run length, byte)` pairs.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RleError {
    /// Payload ended before the expected output length was reached.
    Underflow { decoded: usize, expected: usize },
    /// Runs decode to more bytes than expected.
    Overflow { expected: usize },
    /// Zero-length run or over-long varint.
    BadRun,
}

impl fmt::Display for RleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RleError::Underflow { decoded, expected } => {
                write!(f, "rle underflow: {decoded} of {expected} bytes")
            }
            RleError::Overflow { expected } => write!(f, "rle overflow past {expected} bytes"),
            RleError::BadRun => f.write_str("malformed rle run"),
        }
    }
}

fn push_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8 & 0x7f) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

fn read_varint(data: &[u8], pos: &mut usize) -> Option<u64> {
    let mut v = 0u64;
    for shift in (0..64).step_by(7) {
        let b = *data.get(*pos)?;
        *pos += 1;
        v |= ((b & 0x7f) as u64) << shift;
        if b & 0x80 == 0 {
            return Some(v);
        }
    }
    None
}

pub fn encode(data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < data.len() {
        let value = data[i];
        let run = data[i..].iter().take_while(|&&b| b == value).count();
        push_varint(&mut out, run as u64);
        out.push(value);
        i += run;
    }
    out
}

pub fn decode(payload: &[u8], expected_len: usize) -> Result<Vec<u8>, RleError> {
    let mut out = Vec::with_capacity(expected_len);
    let mut pos = 0;
    while pos < payload.len() {
        let run = read_varint(payload, &mut pos).ok_or(RleError::BadRun)?;
        let Some(&value) = payload.get(pos) else {
            return Err(RleError::Underflow {
                decoded: out.len(),
                expected: expected_len,
            });
        };
        pos += 1;
        if run == 0 {
            return Err(RleError::BadRun);
        }
        if out.len() as u64 + run > expected_len as u64 {
            return Err(RleError::Overflow {
                expected: expected_len,
            });
        }
        out.resize(out.len() + run as usize, value);
    }
    if out.len() != expected_len {
        return Err(RleError::Underflow {
            decoded: out.len(),
            expected: expected_len,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn long_zero_run_is_tiny() {
        let zeros = vec![0u8; 230_400];
        let enc = encode(&zeros);
        assert_eq!(enc.len(), 4);
        assert_eq!(decode(&enc, zeros.len()).unwrap(), zeros);
    }

    #[test]
    fn empty() {
        assert!(encode(&[]).is_empty());
        assert_eq!(decode(&[], 0).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn detects_underflow_and_overflow() {
        let enc = encode(&[7u8; 10]);
        assert!(matches!(decode(&enc, 11), Err(RleError::Underflow { .. })));
        assert!(matches!(decode(&enc, 9), Err(RleError::Overflow { .. })));
        assert!(matches!(decode(&enc[..1], 10), Err(RleError::Underflow { .. })));
        assert_eq!(decode(&[0, 5], 0), Err(RleError::BadRun));
    }

    proptest! {
        #[test]
        fn roundtrip(data in proptest::collection::vec(prop_oneof![Just(0u8), any::<u8>()], 0..2000)) {
            prop_assert_eq!(decode(&encode(&data), data.len()).unwrap(), data);
        }
    }
}
