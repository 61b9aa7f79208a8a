//! Pluggable signing. The default scheme is a keyed hash over the canonical
//! encoding: adequate for a closed desk-scale network where the verifier
//! registry is provisioned at genesis. An asymmetric scheme plugs in by
//! implementing [`Signer`] and [`Verifier`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::hash::{digest, digest_parts, Address};

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; 32]);

impl Signature {
    pub const EMPTY: Signature = Signature([0u8; 32]);
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sig:{}", &hex::encode(self.0)[..8])
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(Signature(out))
    }
}

pub trait Signer: Send + Sync {
    fn address(&self) -> Address;
    fn sign(&self, message: &[u8]) -> Signature;
}

pub trait Verifier: Send + Sync {
    /// True iff `signature` was produced over `message` by the key
    /// registered for `signer`. Unknown signers never verify.
    fn verify(&self, signer: &Address, message: &[u8], signature: &Signature) -> bool;
    fn is_registered(&self, account: &Address) -> bool;
}

#[derive(Clone)]
pub struct KeyedHashSigner {
    secret: [u8; 32],
    address: Address,
}

impl KeyedHashSigner {
    pub fn new(secret: [u8; 32]) -> Self {
        let address = Address::from_digest(&digest_parts(&[b"addr", &secret]));
        KeyedHashSigner { secret, address }
    }

    /// Deterministic key for harnesses and examples.
    pub fn from_seed(seed: &str) -> Self {
        Self::new(digest_parts(&[b"seed", seed.as_bytes()]).0)
    }

    pub fn verifying_key(&self) -> [u8; 32] {
        self.secret
    }
}

impl fmt::Debug for KeyedHashSigner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyedHashSigner").field("address", &self.address).finish()
    }
}

fn keyed(secret: &[u8; 32], message: &[u8]) -> Signature {
    Signature(digest_parts(&[secret, message]).0)
}

impl Signer for KeyedHashSigner {
    fn address(&self) -> Address {
        self.address
    }

    fn sign(&self, message: &[u8]) -> Signature {
        keyed(&self.secret, message)
    }
}

/// Verifier registry for keyed-hash accounts.
#[derive(Clone, Default)]
pub struct KeyRegistry {
    keys: BTreeMap<Address, [u8; 32]>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, signer: &KeyedHashSigner) {
        self.keys.insert(signer.address(), signer.verifying_key());
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

impl fmt::Debug for KeyRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.keys.keys()).finish()
    }
}

impl Verifier for KeyRegistry {
    fn verify(&self, signer: &Address, message: &[u8], signature: &Signature) -> bool {
        self.keys
            .get(signer)
            .is_some_and(|secret| keyed(secret, message) == *signature)
    }

    fn is_registered(&self, account: &Address) -> bool {
        self.keys.contains_key(account)
    }
}

/// Content-addressed helper used by tests and the harness.
pub fn fingerprint(data: &[u8]) -> String {
    digest(data).to_hex()[..16].to_string()
}
