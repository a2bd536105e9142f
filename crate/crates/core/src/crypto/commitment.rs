use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{hexser, sha256};

/// `SHA-256(message || randomness)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Commitment(#[serde(with = "hexser")] pub [u8; 32]);

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Opening {
    #[serde(with = "hexser")]
    pub message: Vec<u8>,
    #[serde(with = "hexser")]
    pub randomness: [u8; 32],
}

impl Opening {
    pub fn new(message: impl Into<Vec<u8>>, randomness: [u8; 32]) -> Self {
        Opening {
            message: message.into(),
            randomness,
        }
    }

    pub fn random<R: RngCore>(message: impl Into<Vec<u8>>, rng: &mut R) -> Self {
        let mut randomness = [0u8; 32];
        rng.fill_bytes(&mut randomness);
        Opening::new(message, randomness)
    }
}

pub fn commit(opening: &Opening) -> Commitment {
    Commitment(sha256(&[&opening.message, &opening.randomness]))
}

pub fn verify_open(opening: &Opening, c: &Commitment) -> bool {
    commit(opening) == *c
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_message_hashes_randomness_only() {
        let o = Opening::new(Vec::new(), [0; 32]);
        assert_eq!(
            hex::encode(commit(&o).0),
            "66687aadf862bd776c8fc18b8e9f8e20089714856ee233b3902a591d0d5f2925"
        );
    }

    proptest! {
        #[test]
        fn open_round_trips_and_bit_flips_fail(
            msg in proptest::collection::vec(any::<u8>(), 0..64),
            rnd in any::<[u8; 32]>(),
            bit in 0usize..8,
        ) {
            let o = Opening::new(msg.clone(), rnd);
            let c = commit(&o);
            prop_assert!(verify_open(&o, &c));

            let mut r2 = o.clone();
            r2.randomness[0] ^= 1 << bit;
            prop_assert!(!verify_open(&r2, &c));

            if !msg.is_empty() {
                let mut m2 = o.clone();
                m2.message[msg.len() - 1] ^= 1 << bit;
                prop_assert!(!verify_open(&m2, &c));
            }
        }
    }
}
