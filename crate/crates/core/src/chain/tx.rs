use serde::{Deserialize, Serialize};

use super::crypto::{Signature, Signer, Verifier};
use super::encoding::{Decoder, Encoder};
use super::hash::{digest, Address, Hash32};
use super::ChainError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: Address,
    pub nonce: u64,
    #[serde(with = "hex_octets")]
    pub payload: Vec<u8>,
    pub signature: Signature,
}

impl Transaction {
    pub fn new_signed(signer: &dyn Signer, nonce: u64, payload: Vec<u8>) -> Self {
        let mut tx = Transaction { sender: signer.address(), nonce, payload, signature: Signature::EMPTY };
        tx.signature = signer.sign(&tx.signing_bytes());
        tx
    }

    pub fn signing_bytes(&self) -> Vec<u8> {
        Encoder::new().bytes(&self.sender.0).u64(self.nonce).bytes(&self.payload).finish()
    }

    pub fn encode(&self) -> Vec<u8> {
        Encoder::new()
            .bytes(&self.sender.0)
            .u64(self.nonce)
            .bytes(&self.payload)
            .bytes(&self.signature.0)
            .finish()
    }

    pub fn decode(data: &[u8]) -> Result<Self, ChainError> {
        let mut dec = Decoder::new(data);
        let tx = Self::decode_from(&mut dec)?;
        dec.end()?;
        Ok(tx)
    }

    pub(crate) fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, ChainError> {
        Ok(Transaction {
            sender: Address(dec.array()?),
            nonce: dec.u64()?,
            payload: dec.bytes()?.to_vec(),
            signature: Signature(dec.array()?),
        })
    }

    /// Digest of the canonical encoding; also the Merkle leaf.
    pub fn hash(&self) -> Hash32 {
        digest(&self.encode())
    }

    pub fn verify(&self, verifier: &dyn Verifier) -> Result<(), ChainError> {
        if !verifier.is_registered(&self.sender) {
            return Err(ChainError::UnknownSender);
        }
        if !verifier.verify(&self.sender, &self.signing_bytes(), &self.signature) {
            return Err(ChainError::BadSignature);
        }
        Ok(())
    }
}

pub(crate) mod hex_octets {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}
