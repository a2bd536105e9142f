//! Non-interactive proof that `log_G X = log_H Y` (Chaum-Pedersen with Fiat-Shamir).
//!
//! The challenge is `SHA-256(x(KY) || x(KX))` with 32-byte big-endian
//! x-coordinates, read as a big-endian integer and reduced modulo the group order.

use std::fmt;

use k256::elliptic_curve::group::Group;
use k256::elliptic_curve::ops::Reduce;
use k256::elliptic_curve::sec1::{FromEncodedPoint, ToEncodedPoint};
use k256::elliptic_curve::{Field, PrimeField};
use k256::{AffinePoint, EncodedPoint, FieldBytes, ProjectivePoint, Scalar as K256Scalar, U256};
use rand::{CryptoRng, RngCore};
use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::sha256;

/// A secp256k1 point, serialised as SEC1-compressed hex.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Point(pub ProjectivePoint);

/// A scalar modulo the secp256k1 group order, serialised as 32-byte big-endian hex.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Scalar(pub K256Scalar);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NizkError {
    #[error("witness must be non-zero")]
    ZeroWitness,
    #[error("statement contains the identity point")]
    IdentityPoint,
    #[error("malformed encoding: {0}")]
    Malformed(String),
}

impl Point {
    pub fn generator() -> Self {
        Point(ProjectivePoint::GENERATOR)
    }

    pub fn mul(&self, k: &Scalar) -> Point {
        Point(self.0 * k.0)
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0 + other.0)
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0 - other.0)
    }

    pub fn is_identity(&self) -> bool {
        bool::from(self.0.is_identity())
    }

    /// Big-endian affine x-coordinate, or `None` for the identity.
    pub fn x_coordinate(&self) -> Option<[u8; 32]> {
        let enc = self.0.to_affine().to_encoded_point(false);
        enc.x().map(|x| (*x).into())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.to_affine().to_encoded_point(true).as_bytes().to_vec()
    }

    /// Parses a SEC1 point; the identity is refused.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NizkError> {
        let enc = EncodedPoint::from_bytes(bytes).map_err(|e| NizkError::Malformed(e.to_string()))?;
        let aff: Option<AffinePoint> = AffinePoint::from_encoded_point(&enc).into();
        let p = aff.ok_or_else(|| NizkError::Malformed("not a curve point".into()))?;
        let p = Point(p.into());
        if p.is_identity() {
            return Err(NizkError::IdentityPoint);
        }
        Ok(p)
    }

    pub fn from_hex(s: &str) -> Result<Self, NizkError> {
        Self::from_bytes(&hex::decode(s).map_err(|e| NizkError::Malformed(e.to_string()))?)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Point({})", self.to_hex())
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Point::from_hex(&String::deserialize(d)?).map_err(D::Error::custom)
    }
}

impl Scalar {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Scalar(K256Scalar::random(rng))
    }

    pub fn from_u64(v: u64) -> Self {
        Scalar(K256Scalar::from(v))
    }

    /// Big-endian bytes reduced modulo the group order.
    pub fn reduce(bytes: &[u8; 32]) -> Self {
        Scalar(<K256Scalar as Reduce<U256>>::reduce_bytes(&FieldBytes::from(*bytes)))
    }

    /// Canonical big-endian bytes; values at or above the group order are refused.
    pub fn from_canonical(bytes: &[u8; 32]) -> Result<Self, NizkError> {
        Option::from(K256Scalar::from_repr(FieldBytes::from(*bytes)))
            .map(Scalar)
            .ok_or_else(|| NizkError::Malformed("scalar not below group order".into()))
    }

    pub fn from_hex(s: &str) -> Result<Self, NizkError> {
        let raw = hex::decode(s).map_err(|e| NizkError::Malformed(e.to_string()))?;
        let arr: [u8; 32] = raw
            .try_into()
            .map_err(|_| NizkError::Malformed("scalar must be 32 bytes".into()))?;
        Self::from_canonical(&arr)
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes().into()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn is_zero(&self) -> bool {
        bool::from(self.0.is_zero())
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", self.to_hex())
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Scalar::from_hex(&String::deserialize(d)?).map_err(D::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NizkProof {
    pub kx: Point,
    pub ky: Point,
    pub s: Scalar,
}

/// Fiat-Shamir challenge. Both commitments must be non-identity.
pub fn challenge(kx: &Point, ky: &Point) -> Option<Scalar> {
    let ky_x = ky.x_coordinate()?;
    let kx_x = kx.x_coordinate()?;
    Some(Scalar::reduce(&sha256(&[&ky_x, &kx_x])))
}

/// The public statement `(X, Y) = (x·G, x·H)`.
pub fn statement(x: &Scalar, g: &Point, h: &Point) -> (Point, Point) {
    (g.mul(x), h.mul(x))
}

pub fn nizk_prove<R: RngCore + CryptoRng>(
    x: &Scalar,
    g: &Point,
    h: &Point,
    rng: &mut R,
) -> Result<NizkProof, NizkError> {
    loop {
        let k = Scalar::random(rng);
        if !k.is_zero() {
            return nizk_prove_with_nonce(x, g, h, &k);
        }
    }
}

/// Proof with a caller-chosen nonce `k`. Reusing `k` across statements leaks `x`;
/// this exists for reproducible test vectors.
pub fn nizk_prove_with_nonce(
    x: &Scalar,
    g: &Point,
    h: &Point,
    k: &Scalar,
) -> Result<NizkProof, NizkError> {
    if x.is_zero() {
        return Err(NizkError::ZeroWitness);
    }
    if g.is_identity() || h.is_identity() || k.is_zero() {
        return Err(NizkError::IdentityPoint);
    }
    let kx = g.mul(k);
    let ky = h.mul(k);
    let c = challenge(&kx, &ky).ok_or(NizkError::IdentityPoint)?;
    let s = Scalar(k.0 + c.0 * x.0);
    Ok(NizkProof { kx, ky, s })
}

fn verify_half(base: &Point, public: &Point, k: &Point, s: &Scalar, c: &Scalar) -> bool {
    if public.is_identity() || k.is_identity() {
        return false;
    }
    base.0 * s.0 == k.0 + public.0 * c.0
}

pub fn nizk_verify(g: &Point, h: &Point, x: &Point, y: &Point, proof: &NizkProof) -> bool {
    if g.is_identity() || h.is_identity() {
        return false;
    }
    let Some(c) = challenge(&proof.kx, &proof.ky) else {
        return false;
    };
    verify_half(g, x, &proof.kx, &proof.s, &c) && verify_half(h, y, &proof.ky, &proof.s, &c)
}
