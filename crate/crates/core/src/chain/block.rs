use serde::{Deserialize, Serialize};

use super::crypto::{Signature, Signer};
use super::encoding::{Decoder, Encoder};
use super::hash::{digest, Address, Hash32};
use super::merkle::{merkle_proof_of_leaves, merkle_root_of_leaves, ProofStep};
use super::tx::Transaction;
use super::ChainError;

/// `skipped` is the skip certificate: how many rotation slots were passed
/// over because their proposers timed out. The proposer for a header is
/// `authorities[(height + skipped) mod n]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockHeader {
    pub parent_hash: Hash32,
    pub height: u64,
    pub merkle_root: Hash32,
    pub timestamp_ms: u64,
    pub proposer: Address,
    pub skipped: u64,
    pub proposer_signature: Signature,
}

impl BlockHeader {
    pub fn signing_bytes(&self) -> Vec<u8> {
        self.encoder().finish()
    }

    fn encoder(&self) -> Encoder {
        Encoder::new()
            .bytes(&self.parent_hash.0)
            .u64(self.height)
            .bytes(&self.merkle_root.0)
            .u64(self.timestamp_ms)
            .bytes(&self.proposer.0)
            .u64(self.skipped)
    }

    pub fn encode(&self) -> Vec<u8> {
        self.encoder().bytes(&self.proposer_signature.0).finish()
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, ChainError> {
        Ok(BlockHeader {
            parent_hash: Hash32(dec.array()?),
            height: dec.u64()?,
            merkle_root: Hash32(dec.array()?),
            timestamp_ms: dec.u64()?,
            proposer: Address(dec.array()?),
            skipped: dec.u64()?,
            proposer_signature: Signature(dec.array()?),
        })
    }

    pub fn hash(&self) -> Hash32 {
        digest(&self.encode())
    }

    pub fn sign(&mut self, signer: &dyn Signer) {
        self.proposer = signer.address();
        self.proposer_signature = signer.sign(&self.signing_bytes());
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
}

impl Block {
    pub fn hash(&self) -> Hash32 {
        self.header.hash()
    }

    pub fn height(&self) -> u64 {
        self.header.height
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new().bytes(&self.header.encode()).u64(self.transactions.len() as u64);
        for tx in &self.transactions {
            enc = enc.bytes(&tx.encode());
        }
        enc.finish()
    }

    pub fn decode(data: &[u8]) -> Result<Self, ChainError> {
        let mut dec = Decoder::new(data);
        let header = BlockHeader::decode_from(&mut Decoder::new(dec.bytes()?))?;
        let n = dec.u64()?;
        let mut transactions = Vec::new();
        for _ in 0..n {
            transactions.push(Transaction::decode(dec.bytes()?)?);
        }
        dec.end()?;
        Ok(Block { header, transactions })
    }
}

pub fn merkle_root(txs: &[Transaction]) -> Hash32 {
    let leaves: Vec<Hash32> = txs.iter().map(Transaction::hash).collect();
    merkle_root_of_leaves(&leaves)
}

pub fn merkle_proof(txs: &[Transaction], index: usize) -> Result<Vec<ProofStep>, ChainError> {
    let leaves: Vec<Hash32> = txs.iter().map(Transaction::hash).collect();
    merkle_proof_of_leaves(&leaves, index)
}
