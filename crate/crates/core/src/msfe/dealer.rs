//! Trusted dealer standing in for the secure-computation step of an execution.
//!
//! The dealer evaluates `g` on the inputs, XOR-shares the output among the
//! parties and commits to each share. Each party learns only its own opening and
//! the vector of commitments.

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::crypto::{commit, Commitment, Opening};

/// Functions evaluated by the dealer. Every function has a fixed output width.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SfeFunction {
    /// Bytewise XOR of the inputs, each zero-padded or truncated to `width`.
    Xor { width: usize },
    /// Wrapping sum of the inputs read as big-endian `u64` (first 8 bytes, zero-padded).
    AddU64,
    /// Lexicographic maximum of the inputs padded to `width`.
    Max { width: usize },
}

fn fit(input: &[u8], width: usize) -> Vec<u8> {
    let mut v = input[..input.len().min(width)].to_vec();
    v.resize(width, 0);
    v
}

impl SfeFunction {
    pub fn output_len(&self) -> usize {
        match self {
            SfeFunction::Xor { width } | SfeFunction::Max { width } => *width,
            SfeFunction::AddU64 => 8,
        }
    }

    pub fn eval(&self, inputs: &[Vec<u8>]) -> Vec<u8> {
        match self {
            SfeFunction::Xor { width } => inputs.iter().fold(vec![0; *width], |mut acc, y| {
                for (a, b) in acc.iter_mut().zip(fit(y, *width)) {
                    *a ^= b;
                }
                acc
            }),
            SfeFunction::AddU64 => inputs
                .iter()
                .map(|y| u64::from_be_bytes(fit(y, 8).try_into().expect("8 bytes")))
                .fold(0u64, u64::wrapping_add)
                .to_be_bytes()
                .to_vec(),
            SfeFunction::Max { width } => inputs
                .iter()
                .map(|y| fit(y, *width))
                .max()
                .unwrap_or_else(|| vec![0; *width]),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DealerOutput {
    pub z: Vec<u8>,
    /// `x_j = (z_j; ω_j)`, one per party.
    pub openings: Vec<Opening>,
    pub h: Vec<Commitment>,
}

pub fn dealer_execute<R: RngCore + CryptoRng>(
    g: &SfeFunction,
    inputs: &[Vec<u8>],
    rng: &mut R,
) -> DealerOutput {
    let n = inputs.len();
    let z = g.eval(inputs);
    let mut shares: Vec<Vec<u8>> = Vec::with_capacity(n);
    let mut last = z.clone();
    for _ in 1..n {
        let mut s = vec![0u8; z.len()];
        rng.fill_bytes(&mut s);
        for (a, b) in last.iter_mut().zip(&s) {
            *a ^= b;
        }
        shares.push(s);
    }
    shares.push(last);
    let openings: Vec<Opening> = shares.into_iter().map(|s| Opening::random(s, rng)).collect();
    let h = openings.iter().map(commit).collect();
    DealerOutput { z, openings, h }
}
