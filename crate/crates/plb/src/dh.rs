//! Unauthenticated key agreement: classic Diffie-Hellman over the 1536-bit
//! MODP group (RFC 3526, group 5) with generator 2. The protocol layer only
//! needs the agreement property; authenticity comes from the ledger.

use crate::hash::{sha256_parts, tag, Hash32};
use num_bigint::BigUint;
use num_traits::One;
use rand::RngCore;
use std::sync::LazyLock;
use thiserror::Error;

const MODP_1536_HEX: &str = concat!(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74",
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437",
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED",
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05",
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB",
    "9ED529077096966D670C354E4ABC9804F1746C08CA237327FFFFFFFFFFFFFFFF",
);

/// Encoded public-key length in bytes (big-endian, fixed width).
pub const PUBLIC_KEY_LEN: usize = 192;

static PRIME: LazyLock<BigUint> =
    LazyLock::new(|| BigUint::parse_bytes(MODP_1536_HEX.as_bytes(), 16).unwrap());
static GENERATOR: LazyLock<BigUint> = LazyLock::new(|| BigUint::from(2u32));

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KaError {
    #[error("malformed or out-of-range peer public key")]
    InvalidPeerKey,
}

/// Fixed-width big-endian encoding of a group element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PublicKey(pub Vec<u8>);

impl PublicKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

#[derive(Clone)]
pub struct KeyPair {
    secret: BigUint,
    public: PublicKey,
}

impl KeyPair {
    pub fn public(&self) -> &PublicKey {
        &self.public
    }
}

/// 32-byte session key after key derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SharedSecret(pub Hash32);

fn encode_element(v: &BigUint) -> Vec<u8> {
    let raw = v.to_bytes_be();
    let mut out = vec![0u8; PUBLIC_KEY_LEN - raw.len()];
    out.extend_from_slice(&raw);
    out
}

pub fn keygen(rng: &mut dyn RngCore) -> KeyPair {
    let mut exp = [0u8; 32];
    rng.fill_bytes(&mut exp);
    let secret = BigUint::from_bytes_be(&exp);
    let public = PublicKey(encode_element(&GENERATOR.modpow(&secret, &PRIME)));
    KeyPair { secret, public }
}

/// Raw agreement output fed through the key-derivation hash. Rejects
/// malformed encodings and trivial group elements.
pub fn derive(keypair: &KeyPair, peer: &PublicKey) -> Result<SharedSecret, KaError> {
    if peer.0.len() != PUBLIC_KEY_LEN {
        return Err(KaError::InvalidPeerKey);
    }
    let y = BigUint::from_bytes_be(&peer.0);
    let one = BigUint::one();
    if y <= one || y >= &*PRIME - &one {
        return Err(KaError::InvalidPeerKey);
    }
    let raw = y.modpow(&keypair.secret, &PRIME);
    Ok(SharedSecret(sha256_parts(&[tag::SHARED_KEY, &encode_element(&raw)])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn honest_parties_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = keygen(&mut rng);
        let b = keygen(&mut rng);
        assert_eq!(derive(&a, b.public()).unwrap(), derive(&b, a.public()).unwrap());
    }

    #[test]
    fn substituted_keys_diverge() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = keygen(&mut rng);
        let b = keygen(&mut rng);
        let m = keygen(&mut rng);
        // MitM: A derives with M's key, B derives with M's key; sides differ.
        let a_side = derive(&a, m.public()).unwrap();
        let b_side = derive(&b, m.public()).unwrap();
        assert_ne!(a_side, b_side);
    }

    #[test]
    fn malformed_peer_keys_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = keygen(&mut rng);
        assert_eq!(derive(&a, &PublicKey(vec![1, 2, 3])).unwrap_err(), KaError::InvalidPeerKey);
        let zero = PublicKey(vec![0; PUBLIC_KEY_LEN]);
        assert_eq!(derive(&a, &zero).unwrap_err(), KaError::InvalidPeerKey);
        let mut one = vec![0; PUBLIC_KEY_LEN];
        one[PUBLIC_KEY_LEN - 1] = 1;
        assert_eq!(derive(&a, &PublicKey(one)).unwrap_err(), KaError::InvalidPeerKey);
    }
}
