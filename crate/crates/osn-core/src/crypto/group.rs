//! Prime-order multiplicative groups used by the policy-based encryption
//! layer.
//!
//! Each named group is the quadratic-residue subgroup of Z_p* for a safe
//! prime p = 2q + 1, so the subgroup has prime order q and discrete log is
//! assumed hard at the 2048-bit size. Exponents (scalars) live in Z_q.
//! Smaller groups exist for fast deterministic tests; they offer no
//! meaningful security and are labelled accordingly.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::CryptoError;
use crate::wire::{Reader, WireError, Writer};

/// RFC 3526 group 14 modulus (2048-bit MODP), a safe prime.
const MODP_2048_P_HEX: &str = concat!(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74",
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437",
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED",
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05",
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB",
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B",
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718",
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
);

/// 256-bit safe prime; fast enough for randomized suites while keeping the
/// arithmetic non-trivial.
const MODP_256_P_HEX: &str = "DD04D45384E58F6E92F6148917850B598F358D1883347DB18387DE8529D872E3";

/// 64-bit safe prime for deterministic unit tests only.
const MODP_64_P_HEX: &str = "9206374FF66F9E0B";

/// Scalar in Z_q (an exponent).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Scalar(pub(crate) BigUint);

/// Element of the order-q subgroup of Z_p*.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct GroupElement(pub(crate) BigUint);

/// Group description: modulus, subgroup order, and generator.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Group {
    name: String,
    p: BigUint,
    q: BigUint,
    g: BigUint,
}

impl Group {
    /// Looks up a named group: `modp-2048`, `modp-256`, or `modp-64`.
    pub fn by_name(name: &str) -> Result<Group, CryptoError> {
        match name {
            "modp-2048" => Ok(Self::modp_2048()),
            "modp-256" => Ok(Self::modp_256()),
            "modp-64" => Ok(Self::modp_64()),
            other => Err(CryptoError::UnknownGroup(other.to_string())),
        }
    }

    pub fn modp_2048() -> Group {
        Self::from_safe_prime("modp-2048", MODP_2048_P_HEX, 2u32)
    }

    pub fn modp_256() -> Group {
        // g = 4 = 2^2 is a quadratic residue, hence generates the order-q subgroup
        Self::from_safe_prime("modp-256", MODP_256_P_HEX, 4u32)
    }

    pub fn modp_64() -> Group {
        Self::from_safe_prime("modp-64", MODP_64_P_HEX, 4u32)
    }

    fn from_safe_prime(name: &str, p_hex: &str, g: u32) -> Group {
        let p = BigUint::parse_bytes(p_hex.as_bytes(), 16).expect("valid hex constant");
        let q = (&p - 1u32) >> 1;
        Group {
            name: name.to_string(),
            p,
            q,
            g: BigUint::from(g),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> &BigUint {
        &self.q
    }

    /// Fixed-width byte length of an encoded scalar.
    pub fn scalar_len(&self) -> usize {
        (self.q.bits() as usize + 7) / 8
    }

    /// Fixed-width byte length of an encoded group element.
    pub fn element_len(&self) -> usize {
        (self.p.bits() as usize + 7) / 8
    }

    /// Uniform scalar in [1, q-1].
    pub fn random_scalar(&self, rng: &mut impl RngCore) -> Scalar {
        loop {
            let candidate = rng.gen_biguint_below(&self.q);
            if !candidate.is_zero() {
                return Scalar(candidate);
            }
        }
    }

    pub fn scalar_from_u64(&self, v: u64) -> Scalar {
        Scalar(BigUint::from(v) % &self.q)
    }

    pub fn generator(&self) -> GroupElement {
        GroupElement(self.g.clone())
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(BigUint::one())
    }

    pub fn generator_pow(&self, e: &Scalar) -> GroupElement {
        GroupElement(self.g.modpow(&e.0, &self.p))
    }

    pub fn pow(&self, base: &GroupElement, e: &Scalar) -> GroupElement {
        GroupElement(base.0.modpow(&e.0, &self.p))
    }

    pub fn mul_elements(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        GroupElement((&a.0 * &b.0) % &self.p)
    }

    pub fn mul_scalars(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 * &b.0) % &self.q)
    }

    pub fn add_scalars(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &b.0) % &self.q)
    }

    pub fn sub_scalars(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar(((&a.0 + &self.q) - (&b.0 % &self.q)) % &self.q)
    }

    /// Multiplicative inverse mod q via Fermat (q is prime).
    pub fn invert_scalar(&self, s: &Scalar) -> Result<Scalar, CryptoError> {
        if s.0.is_zero() {
            return Err(CryptoError::ZeroScalar);
        }
        let exp = &self.q - 2u32;
        Ok(Scalar(s.0.modpow(&exp, &self.q)))
    }

    /// Membership check: in range and of order dividing q.
    pub fn is_valid_element(&self, e: &GroupElement) -> bool {
        if e.0.is_zero() || e.0 >= self.p {
            return false;
        }
        e.0.modpow(&self.q, &self.p).is_one()
    }

    pub fn encode_scalar(&self, s: &Scalar) -> Vec<u8> {
        to_fixed_be(&s.0, self.scalar_len())
    }

    pub fn decode_scalar(&self, bytes: &[u8]) -> Result<Scalar, CryptoError> {
        if bytes.len() != self.scalar_len() {
            return Err(CryptoError::Wire(WireError::Malformed("scalar length")));
        }
        let v = BigUint::from_bytes_be(bytes);
        if v >= self.q {
            return Err(CryptoError::Wire(WireError::Malformed("scalar range")));
        }
        Ok(Scalar(v))
    }

    pub fn encode_element(&self, e: &GroupElement) -> Vec<u8> {
        to_fixed_be(&e.0, self.element_len())
    }

    pub fn decode_element(&self, bytes: &[u8]) -> Result<GroupElement, CryptoError> {
        if bytes.len() != self.element_len() {
            return Err(CryptoError::Wire(WireError::Malformed("element length")));
        }
        let e = GroupElement(BigUint::from_bytes_be(bytes));
        if !self.is_valid_element(&e) {
            return Err(CryptoError::InvalidElement);
        }
        Ok(e)
    }

    pub fn encode_element_into(&self, w: &mut Writer, e: &GroupElement) {
        w.put_bytes(&self.encode_element(e));
    }

    pub fn decode_element_from(&self, r: &mut Reader<'_>) -> Result<GroupElement, CryptoError> {
        let raw = r.bytes()?;
        self.decode_element(&raw)
    }
}

fn to_fixed_be(v: &BigUint, width: usize) -> Vec<u8> {
    let raw = v.to_bytes_be();
    assert!(raw.len() <= width, "value wider than field");
    let mut out = vec![0u8; width - raw.len()];
    out.extend_from_slice(&raw);
    out
}
