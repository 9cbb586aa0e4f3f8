//! Seedable error injection standing in for the noisy wireless channel.
//!
//! Two modes: a binary symmetric channel flipping each wire bit
//! independently with an exact rational probability, and an explicit
//! pattern flipping fixed positions. All randomness comes from the
//! documented SplitMix64 stream (see [`crate::rng`]), so a flip set is a
//! pure function of the model and reproducible in other implementations.

use alloc::vec::Vec;
use core::fmt;

use crate::ldpc::{Codeword, EncodingStoppingSet};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChannelError {
    /// Explicit flip position at or beyond the word length.
    PositionOutOfRange { position: usize, len: usize },
    /// Probability string not an exact decimal in [0, 1].
    BadProbability,
}

impl fmt::Display for ChannelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelError::PositionOutOfRange { position, len } => {
                write!(f, "flip position {position} out of range for {len}-bit word")
            }
            ChannelError::BadProbability => write!(f, "probability must be a decimal in [0, 1]"),
        }
    }
}

impl core::error::Error for ChannelError {}

/// Exact probability as a decimal-derived rational, so seeded runs are
/// bit-reproducible without floating point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlipProbability {
    numerator: u64,
    denominator: u64,
}

impl FlipProbability {
    pub const ZERO: FlipProbability = FlipProbability {
        numerator: 0,
        denominator: 1,
    };

    /// Parses an exact decimal such as `"0.2"`, `"0"`, `"1"`, `"0.05"`.
    pub fn parse_decimal(text: &str) -> Result<Self, ChannelError> {
        let text = text.trim();
        let (int_part, frac_part) = match text.split_once('.') {
            Some((i, f)) => (i, f),
            None => (text, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(ChannelError::BadProbability);
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
            || frac_part.len() > 18
        {
            return Err(ChannelError::BadProbability);
        }
        let int_val: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| ChannelError::BadProbability)?
        };
        let denominator = 10u64.pow(frac_part.len() as u32);
        let frac_val: u64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| ChannelError::BadProbability)?
        };
        let numerator = int_val
            .checked_mul(denominator)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or(ChannelError::BadProbability)?;
        if numerator > denominator {
            return Err(ChannelError::BadProbability);
        }
        Ok(FlipProbability {
            numerator,
            denominator,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.numerator == 0
    }

    pub fn as_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

impl fmt::Display for FlipProbability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

/// Error model applied to a transmitted word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChannelModel {
    /// Binary symmetric channel: every bit flips independently with
    /// `flip_probability` under the stream seeded by `seed`.
    Bsc {
        flip_probability: FlipProbability,
        seed: u64,
    },
    /// Flips exactly the listed wire positions.
    Explicit { positions: Vec<usize> },
}

impl ChannelModel {
    /// The same model on an independently derived stream; used to give each
    /// transmission its own seed (`seed XOR message index`).
    pub fn derive(&self, message_index: u64) -> ChannelModel {
        match self {
            ChannelModel::Bsc {
                flip_probability,
                seed,
            } => ChannelModel::Bsc {
                flip_probability: *flip_probability,
                seed: seed ^ message_index,
            },
            explicit => explicit.clone(),
        }
    }
}

/// Applies the model to a bit word, returning the corrupted word and the
/// flipped positions (for test introspection). Deterministic per model.
pub fn transmit_bits(bits: &[u8], model: &ChannelModel) -> Result<(Vec<u8>, Vec<usize>), ChannelError> {
    let mut out = bits.to_vec();
    let mut flipped = Vec::new();
    match model {
        ChannelModel::Bsc {
            flip_probability,
            seed,
        } => {
            if flip_probability.is_zero() {
                return Ok((out, flipped));
            }
            let mut stream = SplitMix64::new(*seed);
            for (i, bit) in out.iter_mut().enumerate() {
                if stream.below(flip_probability.denominator) < flip_probability.numerator {
                    *bit ^= 1;
                    flipped.push(i);
                }
            }
        }
        ChannelModel::Explicit { positions } => {
            for &p in positions {
                if p >= out.len() {
                    return Err(ChannelError::PositionOutOfRange {
                        position: p,
                        len: out.len(),
                    });
                }
                out[p] ^= 1;
                flipped.push(p);
            }
        }
    }
    Ok((out, flipped))
}

/// [`transmit_bits`] over a codeword's wire bits, re-deriving the label
/// order of the corrupted word.
pub fn transmit(
    word: &Codeword,
    schedule: &EncodingStoppingSet,
    model: &ChannelModel,
) -> Result<(Codeword, Vec<usize>), ChannelError> {
    let (wire, flipped) = transmit_bits(&word.wire_bits, model)?;
    let word = Codeword::from_wire_bits(schedule, wire)
        .expect("transmission preserves word length");
    Ok((word, flipped))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_parsing() {
        let p = FlipProbability::parse_decimal("0.2").unwrap();
        assert_eq!((p.numerator, p.denominator), (2, 10));
        assert_eq!(FlipProbability::parse_decimal("0").unwrap().numerator, 0);
        let one = FlipProbability::parse_decimal("1").unwrap();
        assert_eq!(one.numerator, one.denominator);
        assert_eq!(
            FlipProbability::parse_decimal("0.05").unwrap(),
            FlipProbability {
                numerator: 5,
                denominator: 100
            }
        );
        assert!(FlipProbability::parse_decimal("1.5").is_err());
        assert!(FlipProbability::parse_decimal("-0.1").is_err());
        assert!(FlipProbability::parse_decimal("abc").is_err());
        assert!(FlipProbability::parse_decimal(".").is_err());
    }

    #[test]
    fn zero_probability_is_identity() {
        let word = alloc::vec![1u8, 0, 1, 1, 0, 0, 1];
        let model = ChannelModel::Bsc {
            flip_probability: FlipProbability::ZERO,
            seed: 1,
        };
        let (out, flipped) = transmit_bits(&word, &model).unwrap();
        assert_eq!(out, word);
        assert!(flipped.is_empty());
    }

    #[test]
    fn explicit_pattern_flips_exactly_and_involutes() {
        let word = alloc::vec![0u8; 16];
        let model = ChannelModel::Explicit {
            positions: alloc::vec![3, 9],
        };
        let (once, flipped) = transmit_bits(&word, &model).unwrap();
        assert_eq!(flipped, alloc::vec![3, 9]);
        assert_eq!(once.iter().filter(|&&b| b == 1).count(), 2);
        let (twice, _) = transmit_bits(&once, &model).unwrap();
        assert_eq!(twice, word);

        let model = ChannelModel::Explicit {
            positions: alloc::vec![16],
        };
        assert!(matches!(
            transmit_bits(&word, &model),
            Err(ChannelError::PositionOutOfRange { position: 16, .. })
        ));
    }

    #[test]
    fn bsc_is_deterministic_per_seed() {
        let word = alloc::vec![0u8; 64];
        let model = ChannelModel::Bsc {
            flip_probability: FlipProbability::parse_decimal("0.3").unwrap(),
            seed: 99,
        };
        let (a, fa) = transmit_bits(&word, &model).unwrap();
        let (b, fb) = transmit_bits(&word, &model).unwrap();
        assert_eq!(a, b);
        assert_eq!(fa, fb);
        let derived = model.derive(1);
        let (c, _) = transmit_bits(&word, &derived).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bsc_half_probability_mean_flips() {
        let model_for = |i: u64| ChannelModel::Bsc {
            flip_probability: FlipProbability::parse_decimal("0.5").unwrap(),
            seed: 0xC0FFEE ^ i,
        };
        let word = alloc::vec![0u8; 16];
        let mut total = 0usize;
        for i in 0..10_000u64 {
            let (_, flipped) = transmit_bits(&word, &model_for(i)).unwrap();
            total += flipped.len();
        }
        let mean = total as f64 / 10_000.0;
        assert!((mean - 8.0).abs() < 0.3, "mean {mean}");
    }

    #[test]
    fn bsc_empirical_rate_within_three_sigma() {
        let p = FlipProbability::parse_decimal("0.05").unwrap();
        let n_bits = 200_000usize;
        let word = alloc::vec![0u8; n_bits];
        let model = ChannelModel::Bsc {
            flip_probability: p,
            seed: 7,
        };
        let (_, flipped) = transmit_bits(&word, &model).unwrap();
        let expected = p.as_f64() * n_bits as f64;
        let sigma = (n_bits as f64 * p.as_f64() * (1.0 - p.as_f64())).sqrt();
        let got = flipped.len() as f64;
        assert!(
            (got - expected).abs() < 3.0 * sigma,
            "flips {got}, expected {expected} +- {}",
            3.0 * sigma
        );
    }
}
