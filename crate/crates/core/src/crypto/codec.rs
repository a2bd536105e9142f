//! Canonical binary encoding for every signed protocol message.
//!
//! Each message starts with a length-prefixed domain tag, followed by its fields
//! in a fixed order. Integers are big-endian and fixed width, byte strings and
//! sequences carry a `u32` length prefix. Two different messages therefore never
//! share an encoding, even across message kinds.

use crate::crypto::Commitment;
use crate::types::CoinAmount;

pub const TAG_MSFE_ROUND: &str = "statechan/msfe/id-h";
pub const TAG_MSCD_PARAMS: &str = "statechan/mscd/id-tv-b";
pub const TAG_MSCD_UPDATE: &str = "statechan/mscd/j-b";
pub const TAG_MSCD_MESSAGE: &str = "statechan/mscd/id-round-payload";
pub const TAG_DUPLEX_STATE: &str = "statechan/duplex/r-net-withdrawals";

#[derive(Debug, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(tag: &str) -> Self {
        let mut e = Encoder { buf: Vec::new() };
        e.bytes(tag.as_bytes());
        e
    }

    pub fn u32(mut self, v: u32) -> Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(mut self, v: u64) -> Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn i64(mut self, v: i64) -> Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn coins(self, v: CoinAmount) -> Self {
        self.u64(v.0)
    }

    pub fn coin_vec(self, v: &[CoinAmount]) -> Self {
        let e = self.u32(v.len() as u32);
        v.iter().fold(e, |e, c| e.coins(*c))
    }

    pub fn var(mut self, v: &[u8]) -> Self {
        self.bytes(v);
        self
    }

    pub fn fixed(mut self, v: &[u8]) -> Self {
        self.buf.extend_from_slice(v);
        self
    }

    pub fn commitments(self, v: &[Commitment]) -> Self {
        let e = self.u32(v.len() as u32);
        v.iter().fold(e, |e, c| e.fixed(&c.0))
    }

    fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(&(v.len() as u32).to_be_bytes());
        self.buf.extend_from_slice(v);
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub fn msfe_round(id: i64, h: &[Commitment]) -> Vec<u8> {
    Encoder::new(TAG_MSFE_ROUND).i64(id).commitments(h).finish()
}

pub fn mscd_params(id: i64, tv_digest: &[u8; 32], b: &[CoinAmount]) -> Vec<u8> {
    Encoder::new(TAG_MSCD_PARAMS)
        .i64(id)
        .fixed(tv_digest)
        .coin_vec(b)
        .finish()
}

pub fn mscd_update(j: u32, b: &[CoinAmount]) -> Vec<u8> {
    Encoder::new(TAG_MSCD_UPDATE).u32(j).coin_vec(b).finish()
}

pub fn mscd_message(id: i64, round: u32, payload: &[u8]) -> Vec<u8> {
    Encoder::new(TAG_MSCD_MESSAGE)
        .i64(id)
        .u32(round)
        .var(payload)
        .finish()
}

pub fn duplex_state(r: i64, net: i64, withdrawals: &[CoinAmount; 2]) -> Vec<u8> {
    Encoder::new(TAG_DUPLEX_STATE)
        .i64(r)
        .i64(net)
        .coin_vec(withdrawals)
        .finish()
}
