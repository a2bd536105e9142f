//! Public keys of a fixed party set and the signature bundles checked against them.

use serde::{Deserialize, Serialize};

use super::multisig::{multi_verify, AggregateSignature};
use super::nizk::Point;
use super::signature::{verify, PublicKey, Signature};

/// Either one signature per party, or a single aggregate under `pk_master`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigBundle {
    Individual(Vec<Signature>),
    Aggregate(AggregateSignature),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyRing {
    pub pks: Vec<PublicKey>,
    /// Present when the party set signs with an aggregated key.
    pub master: Option<Point>,
}

impl KeyRing {
    pub fn individual(pks: Vec<PublicKey>) -> Self {
        KeyRing { pks, master: None }
    }

    pub fn n(&self) -> usize {
        self.pks.len()
    }

    pub fn verify_one(&self, slot: usize, m: &[u8], sig: &Signature) -> bool {
        self.pks.get(slot).is_some_and(|pk| verify(pk, m, sig))
    }

    /// True iff the bundle shows that every party signed `m`.
    pub fn verify_all(&self, m: &[u8], bundle: &SigBundle) -> bool {
        match (bundle, &self.master) {
            (SigBundle::Individual(sigs), None) => {
                sigs.len() == self.pks.len()
                    && sigs.iter().zip(&self.pks).all(|(s, pk)| verify(pk, m, s))
            }
            (SigBundle::Aggregate(agg), Some(master)) => multi_verify(master, m, agg),
            _ => false,
        }
    }
}

/// One party's signing material for a session.
#[derive(Clone, Debug)]
pub struct PartySigner {
    pub key: super::SigKeyPair,
    /// Multisignature share, when the session aggregates.
    pub share: Option<super::Scalar>,
}

/// Honest key generation for `n` parties, optionally with an aggregated key.
pub fn keygen_session<R: rand::RngCore + rand::CryptoRng>(
    n: usize,
    aggregate: bool,
    rng: &mut R,
) -> (KeyRing, Vec<PartySigner>) {
    let keys: Vec<super::SigKeyPair> = (0..n).map(|_| super::SigKeyPair::generate(rng)).collect();
    let pks = keys.iter().map(|k| k.pk).collect();
    if !aggregate {
        let signers = keys.into_iter().map(|key| PartySigner { key, share: None }).collect();
        return (KeyRing::individual(pks), signers);
    }
    let ms = super::multi_keygen(n, rng);
    let signers = keys
        .into_iter()
        .zip(ms.shares)
        .map(|(key, s)| PartySigner { key, share: Some(s) })
        .collect();
    (
        KeyRing {
            pks,
            master: Some(ms.master),
        },
        signers,
    )
}

/// Every signer signs `m`; in aggregate mode this runs the multisignature rounds.
pub fn joint_sign<R: rand::RngCore + rand::CryptoRng>(
    ring: &KeyRing,
    signers: &[PartySigner],
    m: &[u8],
    rng: &mut R,
) -> Result<SigBundle, super::MultisigError> {
    if ring.master.is_none() {
        return Ok(SigBundle::Individual(signers.iter().map(|s| s.key.sign(m)).collect()));
    }
    let shares: Vec<_> = signers.iter().map(|s| s.share).collect();
    super::multi_sign(m, &shares, rng).map(SigBundle::Aggregate)
}
