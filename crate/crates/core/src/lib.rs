//! Simulated stateful contracts and the off-chain protocols that run on top of them.
//!
//! The crate is organised around a deterministic [`ledger`] that hosts contract
//! programs, three such programs ([`msfe`], [`mscd`], [`duplex`]) together with the
//! party-side logic that drives them, the cryptographic building blocks in
//! [`crypto`], small applications in [`games`], and the adversarial harness in
//! [`sim`] that runs whole scenarios and checks their settlement properties.

pub mod crypto;
pub mod duplex;
pub mod games;
pub mod ledger;
pub mod mscd;
pub mod msfe;
pub mod sim;
pub mod types;

pub use ledger::{ContractId, ContractProgram, Ledger, LedgerError, LedgerEvent};
pub use types::{CoinAmount, CoinError, PartyId, TimePoint};
