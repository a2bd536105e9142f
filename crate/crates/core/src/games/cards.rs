//! A single-card draw: the deck is 52 fixed curve points, a card is ElGamal
//! encrypted under the players' joint key, and each player's unmasking share
//! comes with a proof that it used the same secret as its public key.

use std::sync::OnceLock;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::crypto::{nizk_prove, nizk_verify, sha256, NizkError, NizkProof, Point, Scalar};

pub const DECK_TAG: &[u8] = b"statechan-card";
const RANKS: [&str; 13] = ["A", "2", "3", "4", "5", "6", "7", "8", "9", "10", "J", "Q", "K"];
const SUITS: [&str; 4] = ["S", "H", "D", "C"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeckCard {
    pub name: String,
    /// Counter value at which the hash first landed on the curve.
    pub counter: u32,
    pub point: Point,
}

/// Maps `name` to a curve point: the first `counter` for which
/// `0x02 ‖ SHA-256(tag ‖ name ‖ counter)` decodes as a compressed point.
pub fn hash_to_curve(name: &str) -> (u32, Point) {
    (0u32..)
        .find_map(|counter| {
            let digest = sha256(&[DECK_TAG, name.as_bytes(), &counter.to_be_bytes()]);
            let mut enc = [0u8; 33];
            enc[0] = 0x02;
            enc[1..].copy_from_slice(&digest);
            Point::from_bytes(&enc).ok().map(|p| (counter, p))
        })
        .expect("about half of all x-coordinates are on the curve")
}

/// The 52 cards, spades then hearts, diamonds and clubs, ace to king.
pub fn deck() -> &'static [DeckCard] {
    static DECK: OnceLock<Vec<DeckCard>> = OnceLock::new();
    DECK.get_or_init(|| {
        SUITS
            .iter()
            .flat_map(|s| RANKS.iter().map(move |r| format!("{r}{s}")))
            .map(|name| {
                let (counter, point) = hash_to_curve(&name);
                DeckCard { name, counter, point }
            })
            .collect()
    })
}

pub fn card_index(point: &Point) -> Option<usize> {
    deck().iter().position(|c| c.point == *point)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncryptedCard {
    pub c1: Point,
    pub c2: Point,
}

/// `(r·G, M + r·Y)` for the joint key `Y`.
pub fn encrypt_card(card: usize, joint_key: &Point, r: &Scalar) -> EncryptedCard {
    EncryptedCard {
        c1: Point::generator().mul(r),
        c2: deck()[card].point.add(&joint_key.mul(r)),
    }
}

pub fn joint_key(keys: &[Point]) -> Point {
    keys.iter().skip(1).fold(keys[0], |acc, k| acc.add(k))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnmaskShare {
    pub share: Point,
    pub proof: NizkProof,
}

/// `Y_i = x_i·C1` with a proof that `log_G X_i = log_C1 Y_i`.
pub fn unmask_share<R: RngCore + CryptoRng>(
    x: &Scalar,
    card: &EncryptedCard,
    rng: &mut R,
) -> Result<UnmaskShare, NizkError> {
    let proof = nizk_prove(x, &Point::generator(), &card.c1, rng)?;
    Ok(UnmaskShare {
        share: card.c1.mul(x),
        proof,
    })
}

pub fn card_draw_verify(card: &EncryptedCard, key: &Point, share: &Point, proof: &NizkProof) -> bool {
    nizk_verify(&Point::generator(), &card.c1, key, share, proof)
}

/// Removes every verified share and looks the result up in the deck.
pub fn open_card(card: &EncryptedCard, keys: &[Point], shares: &[UnmaskShare]) -> Option<usize> {
    if keys.len() != shares.len()
        || !keys
            .iter()
            .zip(shares)
            .all(|(k, s)| card_draw_verify(card, k, &s.share, &s.proof))
    {
        return None;
    }
    let m = shares.iter().fold(card.c2, |acc, s| acc.sub(&s.share));
    card_index(&m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn deck_has_52_distinct_points() {
        let d = deck();
        assert_eq!(d.len(), 52);
        assert_eq!(d[0].name, "AS");
        assert_eq!(d[51].name, "KC");
        for (i, c) in d.iter().enumerate() {
            assert_eq!(card_index(&c.point), Some(i));
        }
    }

    #[test]
    fn deck_encodings_are_pinned() {
        // Computed independently with a plain modular square root.
        let d = deck();
        let pinned = [
            (0, 0, "022459dc3f5dfb9a1e40a7a15d8d914d10bad54c43265c28be792a515ce142829c"),
            (7, 4, "021445eeb685ed125e6c80712b8919beedfa990280c9056a82419a9cb5e7be6863"),
            (51, 0, "0291d7976b623b7e5e000687aa2c0597ffa12feffaf431bfef2ab56e5c55fe3372"),
        ];
        for (i, counter, hex) in pinned {
            assert_eq!(d[i].counter, counter, "{}", d[i].name);
            assert_eq!(d[i].point.to_hex(), hex, "{}", d[i].name);
        }
    }

    fn table(n: usize, rng: &mut ChaCha20Rng) -> (Vec<Scalar>, Vec<Point>) {
        let xs: Vec<Scalar> = (0..n).map(|_| Scalar::random(rng)).collect();
        let keys = xs.iter().map(|x| Point::generator().mul(x)).collect();
        (xs, keys)
    }

    #[test]
    fn draw_opens_to_the_encrypted_card() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (xs, keys) = table(3, &mut rng);
        let card = encrypt_card(17, &joint_key(&keys), &Scalar::random(&mut rng));
        let shares: Vec<_> = xs.iter().map(|x| unmask_share(x, &card, &mut rng).unwrap()).collect();
        assert!(card_draw_verify(&card, &keys[0], &shares[0].share, &shares[0].proof));
        assert_eq!(open_card(&card, &keys, &shares), Some(17));
    }

    #[test]
    fn wrong_key_and_replayed_proof_fail() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let (xs, keys) = table(2, &mut rng);
        let y = joint_key(&keys);
        let card = encrypt_card(0, &y, &Scalar::random(&mut rng));
        let other = encrypt_card(1, &y, &Scalar::random(&mut rng));
        let s = unmask_share(&xs[0], &card, &mut rng).unwrap();
        assert!(!card_draw_verify(&card, &keys[1], &s.share, &s.proof));
        assert!(!card_draw_verify(&other, &keys[0], &s.share, &s.proof));
        let bogus = UnmaskShare { share: card.c1.mul(&xs[1]), proof: s.proof.clone() };
        assert_eq!(open_card(&card, &keys, &[bogus, s]), None);
    }
}
