//! Three-round Schnorr multisignature with `pk_master = Σ pk_i`.
//!
//! Rounds: every signer commits to a nonce point, then reveals it, then sends a
//! partial signature `z_i = r_i + c·s_i`. The aggregate `(R, z)` verifies as a
//! single Schnorr signature under `pk_master`, so verification cost does not
//! depend on the number of signers. Keys are assumed honestly generated; rogue-key
//! attacks are not defended against.

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::nizk::{Point, Scalar};
use super::sha256;

const CHALLENGE_TAG: &[u8] = b"statechan/multisig/challenge";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MultisigError {
    #[error("share of signer {0} is missing")]
    MissingShare(usize),
    #[error("signer {0} revealed a nonce that does not match its commitment")]
    NonceMismatch(usize),
    #[error("partial signature of signer {0} is invalid")]
    BadPartial(usize),
    #[error("no signers")]
    Empty,
}

#[derive(Clone, Debug)]
pub struct MultisigKeys {
    pub shares: Vec<Scalar>,
    pub public: Vec<Point>,
    pub master: Point,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateSignature {
    pub r: Point,
    pub z: Scalar,
}

pub fn multi_keygen<R: RngCore + CryptoRng>(n: usize, rng: &mut R) -> MultisigKeys {
    let shares: Vec<Scalar> = (0..n).map(|_| Scalar::random(rng)).collect();
    let public: Vec<Point> = shares.iter().map(|s| Point::generator().mul(s)).collect();
    let master = Point(public.iter().map(|p| p.0).sum());
    MultisigKeys {
        shares,
        public,
        master,
    }
}

fn challenge(r: &Point, master: &Point, m: &[u8]) -> Scalar {
    Scalar::reduce(&sha256(&[CHALLENGE_TAG, &r.to_bytes(), &master.to_bytes(), m]))
}

/// Runs the three signing rounds among the holders of `shares`.
pub fn multi_sign<R: RngCore + CryptoRng>(
    m: &[u8],
    shares: &[Option<Scalar>],
    rng: &mut R,
) -> Result<AggregateSignature, MultisigError> {
    if shares.is_empty() {
        return Err(MultisigError::Empty);
    }
    let shares: Vec<Scalar> = shares
        .iter()
        .enumerate()
        .map(|(i, s)| s.ok_or(MultisigError::MissingShare(i)))
        .collect::<Result<_, _>>()?;
    let public: Vec<Point> = shares.iter().map(|s| Point::generator().mul(s)).collect();
    let master = Point(public.iter().map(|p| p.0).sum());

    // Round 1: nonce commitments.
    let nonces: Vec<Scalar> = shares.iter().map(|_| Scalar::random(rng)).collect();
    let points: Vec<Point> = nonces.iter().map(|r| Point::generator().mul(r)).collect();
    let commitments: Vec<[u8; 32]> = points.iter().map(|p| sha256(&[&p.to_bytes()])).collect();

    // Round 2: reveal, checked against the commitments.
    for (i, p) in points.iter().enumerate() {
        if sha256(&[&p.to_bytes()]) != commitments[i] {
            return Err(MultisigError::NonceMismatch(i));
        }
    }
    let r = Point(points.iter().map(|p| p.0).sum());
    let c = challenge(&r, &master, m);

    // Round 3: partial signatures, each checked before aggregation.
    let mut z = Scalar::from_u64(0);
    for i in 0..shares.len() {
        let zi = Scalar(nonces[i].0 + c.0 * shares[i].0);
        if Point::generator().mul(&zi).0 != points[i].0 + public[i].0 * c.0 {
            return Err(MultisigError::BadPartial(i));
        }
        z = Scalar(z.0 + zi.0);
    }
    Ok(AggregateSignature { r, z })
}

pub fn multi_verify(master: &Point, m: &[u8], sig: &AggregateSignature) -> bool {
    if master.is_identity() || sig.r.is_identity() {
        return false;
    }
    let c = challenge(&sig.r, master, m);
    Point::generator().mul(&sig.z).0 == sig.r.0 + master.0 * c.0
}
