//! Hash commitments, ECDSA signatures, Schnorr multisignatures and the
//! discrete-log-equality proof, all over secp256k1 and SHA-256.

pub mod codec;
pub mod commitment;
pub mod keyring;
pub mod multisig;
pub mod nizk;
pub mod signature;

pub use codec::Encoder;
pub use commitment::{commit, verify_open, Commitment, Opening};
pub use keyring::{joint_sign, keygen_session, KeyRing, PartySigner, SigBundle};
pub use multisig::{multi_keygen, multi_sign, multi_verify, AggregateSignature, MultisigError, MultisigKeys};
pub use nizk::{nizk_prove, nizk_prove_with_nonce, nizk_verify, NizkError, NizkProof, Point, Scalar};
pub use signature::{sign, verify, PublicKey, SigKeyPair, Signature};

use sha2::{Digest, Sha256};

pub fn sha256(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// Hex (de)serialisation for fixed and variable byte fields.
pub(crate) mod hexser {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer, T: AsRef<[u8]>>(bytes: T, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D, T>(d: D) -> Result<T, D::Error>
    where
        D: Deserializer<'de>,
        T: TryFrom<Vec<u8>>,
    {
        let s = String::deserialize(d)?;
        let raw = hex::decode(&s).map_err(D::Error::custom)?;
        T::try_from(raw).map_err(|_| D::Error::custom("wrong byte length"))
    }
}
