//! Deterministic stand-in for a frozen text/molecule encoder: signed
//! feature hashing of character n-grams.

use super::{EncodeError, RAW_DIM};

pub const TOY_HASH_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

const PAD_START: char = '\u{2}';
const PAD_END: char = '\u{3}';

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyEncoderConfig {
    pub ngram: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for ToyEncoderConfig {
    fn default() -> Self {
        ToyEncoderConfig {
            ngram: 3,
            dim: RAW_DIM,
            seed: TOY_HASH_SEED,
        }
    }
}

fn fnv1a(seed: u64, chars: &[char]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325 ^ seed;
    for c in chars {
        for b in (*c as u32).to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    // splitmix64 finalizer to spread the low bits
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Unit-norm hashed n-gram profile of `text`. The text is padded with
/// `ngram - 1` boundary markers on each side so that short strings and
/// string ends still produce features.
pub fn toy_encode(text: &str, cfg: &ToyEncoderConfig) -> Result<Vec<f64>, EncodeError> {
    if text.is_empty() {
        return Err(EncodeError::EmptyInput);
    }
    let n = cfg.ngram.max(1);
    let mut chars = vec![PAD_START; n - 1];
    chars.extend(text.chars());
    chars.extend(std::iter::repeat_n(PAD_END, n - 1));
    let mut out = vec![0.0; cfg.dim];
    for gram in chars.windows(n) {
        let h = fnv1a(cfg.seed, gram);
        let bin = (h % cfg.dim as u64) as usize;
        out[bin] += if h >> 63 == 0 { 1.0 } else { -1.0 };
    }
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut out {
            *v /= norm;
        }
    }
    Ok(out)
}
