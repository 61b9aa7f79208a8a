//! Permissioned ledger with round-robin proof-of-authority.
//!
//! State changes only through [`Node`] commands (submit, block arrival,
//! tick); readers take immutable [`ChainSnapshot`]s. The harness in
//! [`harness`] drives a simulated network of nodes to check agreement,
//! termination, total order and append-only behaviour.

mod block;
pub mod crypto;
pub mod encoding;
pub mod harness;
pub mod hash;
mod mempool;
pub mod merkle;
mod node;
mod state;
mod tx;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use block::{merkle_proof, merkle_root, Block, BlockHeader};
pub use crypto::{KeyRegistry, KeyedHashSigner, Signature, Signer, Verifier};
pub use hash::{digest, Address, Hash32};
pub use mempool::Mempool;
pub use merkle::{verify_proof, ProofStep, Side};
pub use node::{ChainHandle, Command, Node, Outbound};
pub use state::{
    genesis_contract_address, AppendOutcome, ChainParams, ChainSnapshot, ChainState, Genesis, GenesisContract,
    LedgerState, Receipt, TxStatus,
};
pub use tx::Transaction;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("decode error: {0}")]
    Decode(&'static str),
    #[error("index {index} out of range for {len} leaves")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("signature does not verify")]
    BadSignature,
    #[error("sender is not registered")]
    UnknownSender,
    #[error("nonce gap: expected {expected}, got {got}")]
    NonceGap { expected: u64, got: u64 },
    #[error("stale nonce: expected {expected}, got {got}")]
    StaleNonce { expected: u64, got: u64 },
    #[error("transaction already known")]
    DuplicateTx,
    #[error("not this node's turn to propose")]
    NotMyTurn,
    #[error("block interval has not elapsed")]
    IntervalNotElapsed,
    #[error("unknown transaction")]
    UnknownTx,
    #[error("unknown block")]
    UnknownBlock,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("block rejected: {0}")]
    Rejected(RejectReason),
}

/// Why `validate_block` refused a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    UnknownParent,
    BadHeight,
    WrongProposer,
    BadSkip,
    BadProposerSignature,
    OverCapacity,
    BadMerkleRoot,
    BadTx(usize),
    NonMonotoneTime,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RejectReason::BadTx(i) => write!(f, "BadTx({i})"),
            other => write!(f, "{other:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Miner,
    NonMiner,
    ServiceManager,
    Member,
}

impl Role {
    pub fn is_authority(&self) -> bool {
        matches!(self, Role::Miner)
    }
}
