//! Deterministic ECDSA (RFC 6979) over secp256k1.

use std::fmt;

use k256::ecdsa::signature::{Signer, Verifier};
use k256::ecdsa::{SigningKey, VerifyingKey};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::hexser;

/// SEC1-compressed public key.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PublicKey(#[serde(with = "hexser")] pub [u8; 33]);

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", hex::encode(&self.0[..8]))
    }
}

/// Fixed-width `r || s` ECDSA signature.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signature(#[serde(with = "hexser")] pub [u8; 64]);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", hex::encode(&self.0[..8]))
    }
}

#[derive(Clone)]
pub struct SigKeyPair {
    sk: SigningKey,
    pub pk: PublicKey,
}

impl fmt::Debug for SigKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigKeyPair").field("pk", &self.pk).finish()
    }
}

impl SigKeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Self::from_signing_key(SigningKey::random(rng))
    }

    pub fn from_secret_bytes(bytes: &[u8; 32]) -> Result<Self, k256::ecdsa::Error> {
        Ok(Self::from_signing_key(SigningKey::from_bytes(bytes.into())?))
    }

    fn from_signing_key(sk: SigningKey) -> Self {
        let enc = sk.verifying_key().to_encoded_point(true);
        let pk = PublicKey(enc.as_bytes().try_into().expect("compressed point is 33 bytes"));
        SigKeyPair { sk, pk }
    }

    pub fn sign(&self, m: &[u8]) -> Signature {
        sign(self, m)
    }
}

pub fn sign(key: &SigKeyPair, m: &[u8]) -> Signature {
    let sig: k256::ecdsa::Signature = key.sk.sign(m);
    Signature(sig.to_bytes().into())
}

/// False for malformed keys or signatures as well as for mismatches.
pub fn verify(pk: &PublicKey, m: &[u8], sig: &Signature) -> bool {
    let Ok(vk) = VerifyingKey::from_sec1_bytes(&pk.0) else {
        return false;
    };
    let Ok(sig) = k256::ecdsa::Signature::from_slice(&sig.0) else {
        return false;
    };
    vk.verify(m, &sig).is_ok()
}
