//! Bit-exact framing of rekey payloads.
//!
//! A payload is a list of `(node, public key)` pairs. On the wire it becomes
//! a bit string: a 16-bit pair count, then per pair a 16-bit node index, a
//! 16-bit magnitude bit-length, and the magnitude itself most-significant
//! bit first. The stream is segmented into fixed-size blocks for the codec,
//! the last block zero-padded; trailing padding is ignored when reading.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::keytree::NodeId;
use crate::modmath::Natural;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PayloadError {
    /// A field exceeds its 16-bit framing limit.
    FieldOverflow(&'static str),
    /// The bit stream ended or decoded to nonsense.
    Malformed(String),
}

impl fmt::Display for PayloadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayloadError::FieldOverflow(what) => write!(f, "{what} exceeds 16-bit framing"),
            PayloadError::Malformed(why) => write!(f, "malformed payload: {why}"),
        }
    }
}

impl core::error::Error for PayloadError {}

pub fn serialize(pairs: &[(NodeId, Natural)]) -> Result<Vec<u8>, PayloadError> {
    let mut bits = Vec::new();
    let count =
        u16::try_from(pairs.len()).map_err(|_| PayloadError::FieldOverflow("pair count"))?;
    push_u16(&mut bits, count);
    for (node, value) in pairs {
        let node =
            u16::try_from(node.0).map_err(|_| PayloadError::FieldOverflow("node index"))?;
        push_u16(&mut bits, node);
        let len = value.bits();
        let len16 =
            u16::try_from(len).map_err(|_| PayloadError::FieldOverflow("magnitude length"))?;
        push_u16(&mut bits, len16);
        for i in (0..len).rev() {
            bits.push(value.bit(i) as u8);
        }
    }
    Ok(bits)
}

pub fn deserialize(bits: &[u8]) -> Result<Vec<(NodeId, Natural)>, PayloadError> {
    let mut cursor = 0usize;
    let count = read_u16(bits, &mut cursor)? as usize;
    let mut pairs = Vec::with_capacity(count);
    for _ in 0..count {
        let node = read_u16(bits, &mut cursor)? as usize;
        let len = read_u16(bits, &mut cursor)? as usize;
        if cursor + len > bits.len() {
            return Err(PayloadError::Malformed(String::from("truncated magnitude")));
        }
        let mut value = Natural::from(0u32);
        for _ in 0..len {
            value <<= 1u32;
            if bits[cursor] & 1 == 1 {
                value |= Natural::from(1u32);
            }
            cursor += 1;
        }
        if len > 0 && !value.bit(len as u64 - 1) {
            return Err(PayloadError::Malformed(String::from(
                "magnitude shorter than its declared length",
            )));
        }
        pairs.push((NodeId(node), value));
    }
    // Whatever follows is block padding and must be zero.
    if bits[cursor..].iter().any(|&b| b != 0) {
        return Err(PayloadError::Malformed(String::from(
            "nonzero trailing padding",
        )));
    }
    Ok(pairs)
}

/// Splits a bit stream into `block_len`-bit blocks, zero-padding the last.
pub fn to_blocks(bits: &[u8], block_len: usize) -> Vec<Vec<u8>> {
    debug_assert!(block_len > 0);
    if bits.is_empty() {
        return Vec::new();
    }
    bits.chunks(block_len)
        .map(|chunk| {
            let mut block = chunk.to_vec();
            block.resize(block_len, 0);
            block
        })
        .collect()
}

fn push_u16(bits: &mut Vec<u8>, value: u16) {
    for i in (0..16).rev() {
        bits.push(((value >> i) & 1) as u8);
    }
}

fn read_u16(bits: &[u8], cursor: &mut usize) -> Result<u16, PayloadError> {
    if *cursor + 16 > bits.len() {
        return Err(PayloadError::Malformed(String::from("truncated field")));
    }
    let mut value = 0u16;
    for _ in 0..16 {
        value = (value << 1) | (bits[*cursor] & 1) as u16;
        *cursor += 1;
    }
    Ok(value)
}
