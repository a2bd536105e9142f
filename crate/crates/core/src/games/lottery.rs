//! The repeated lottery: every stage moves one coin from each loser to the winner.

use thiserror::Error;

use crate::types::CoinAmount;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LotteryError {
    #[error("party slot {0} has no coin left to stake")]
    InsufficientBalance(usize),
    #[error("expected {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },
}

/// `(x_1 ⊕ … ⊕ x_n) mod n`, reading the XOR as a big-endian integer. For two
/// parties this is the least significant bit of `x_1 ⊕ x_2`.
pub fn winner(inputs: &[Vec<u8>]) -> usize {
    let n = inputs.len();
    let width = inputs.iter().map(Vec::len).max().unwrap_or(0);
    let mut x = vec![0u8; width];
    for y in inputs {
        // Right-align so shorter inputs keep their numeric value.
        let off = width - y.len();
        for (i, b) in y.iter().enumerate() {
            x[off + i] ^= b;
        }
    }
    x.iter()
        .fold(0u64, |acc, b| (acc * 256 + *b as u64) % n as u64) as usize
}

/// One stage: the winner gains `n-1`, everyone else loses one coin.
/// Returns the winner's slot and the new balances.
pub fn lottery_stage(
    inputs: &[Vec<u8>],
    b: &[CoinAmount],
) -> Result<(usize, Vec<CoinAmount>), LotteryError> {
    let n = b.len();
    if inputs.len() != n {
        return Err(LotteryError::Arity {
            expected: n,
            got: inputs.len(),
        });
    }
    if let Some(k) = b.iter().position(|c| c.is_zero()) {
        return Err(LotteryError::InsufficientBalance(k));
    }
    let w = winner(inputs);
    let next = b
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if k == w {
                CoinAmount(c.0 + n as u64 - 1)
            } else {
                CoinAmount(c.0 - 1)
            }
        })
        .collect();
    Ok((w, next))
}

/// Per-party deposit for a lottery table: compensation `q = n-1` times `n-1`.
pub fn lottery_collateral(n: usize) -> CoinAmount {
    let q = n as u64 - 1;
    CoinAmount(q * (n as u64 - 1))
}
