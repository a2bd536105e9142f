use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Discrete simulation time. One tick is one trigger batch on the ledger.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TimePoint(pub u64);

impl TimePoint {
    pub const ZERO: TimePoint = TimePoint(0);

    pub fn next(self) -> TimePoint {
        TimePoint(self.0 + 1)
    }

    pub fn plus(self, ticks: u64) -> TimePoint {
        TimePoint(self.0 + ticks)
    }

    /// Signed view used by contract states whose clocks start at -1.
    pub fn signed(self) -> i64 {
        self.0 as i64
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoinError {
    #[error("coin arithmetic overflow ({0} + {1})")]
    Overflow(u64, u64),
    #[error("coin arithmetic underflow ({0} - {1})")]
    Underflow(u64, u64),
}

/// An amount of indivisible coins. Arithmetic is checked; wrapping is an error.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct CoinAmount(pub u64);

impl CoinAmount {
    pub const ZERO: CoinAmount = CoinAmount(0);

    pub fn new(amount: u64) -> Self {
        CoinAmount(amount)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, other: CoinAmount) -> Result<CoinAmount, CoinError> {
        self.0
            .checked_add(other.0)
            .map(CoinAmount)
            .ok_or(CoinError::Overflow(self.0, other.0))
    }

    pub fn checked_sub(self, other: CoinAmount) -> Result<CoinAmount, CoinError> {
        self.0
            .checked_sub(other.0)
            .map(CoinAmount)
            .ok_or(CoinError::Underflow(self.0, other.0))
    }

    pub fn checked_mul(self, factor: u64) -> Result<CoinAmount, CoinError> {
        self.0
            .checked_mul(factor)
            .map(CoinAmount)
            .ok_or(CoinError::Overflow(self.0, factor))
    }

    pub fn sum<I: IntoIterator<Item = CoinAmount>>(items: I) -> Result<CoinAmount, CoinError> {
        items
            .into_iter()
            .try_fold(CoinAmount::ZERO, |acc, c| acc.checked_add(c))
    }
}

impl fmt::Display for CoinAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A 1-based party index `P_1..P_n`.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct PartyId(pub u32);

impl PartyId {
    pub fn new(index: u32) -> Self {
        assert!(index >= 1, "party ids are 1-based");
        PartyId(index)
    }

    /// Zero-based position, for indexing per-party vectors.
    pub fn slot(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn from_slot(slot: usize) -> Self {
        PartyId(slot as u32 + 1)
    }

    pub fn all(n: usize) -> impl Iterator<Item = PartyId> + Clone {
        (0..n).map(PartyId::from_slot)
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coin_arithmetic_is_checked() {
        assert_eq!(
            CoinAmount(u64::MAX).checked_add(CoinAmount(1)),
            Err(CoinError::Overflow(u64::MAX, 1))
        );
        assert_eq!(
            CoinAmount(3).checked_sub(CoinAmount(4)),
            Err(CoinError::Underflow(3, 4))
        );
        assert_eq!(
            CoinAmount::sum([CoinAmount(1), CoinAmount(2), CoinAmount(3)]),
            Ok(CoinAmount(6))
        );
    }

    #[test]
    fn party_slots_round_trip() {
        for slot in 0..5 {
            assert_eq!(PartyId::from_slot(slot).slot(), slot);
        }
        assert_eq!(PartyId::all(3).collect::<Vec<_>>(), vec![PartyId(1), PartyId(2), PartyId(3)]);
    }
}
