//! Bottom-up binary Merkle tree.
//!
//! Conventions: an empty list commits to `digest("")`; a single leaf is its
//! own root; at any level with an odd count the last node is paired with
//! itself.

use serde::{Deserialize, Serialize};

use super::hash::{digest, digest_parts, Hash32};
use super::ChainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// One sibling on the path from a leaf to the root, with the side the
/// sibling sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofStep {
    pub sibling: Hash32,
    pub side: Side,
}

fn parent(left: &Hash32, right: &Hash32) -> Hash32 {
    digest_parts(&[left.as_bytes(), right.as_bytes()])
}

fn next_level(level: &[Hash32]) -> Vec<Hash32> {
    level
        .chunks(2)
        .map(|pair| parent(&pair[0], pair.get(1).unwrap_or(&pair[0])))
        .collect()
}

pub fn merkle_root_of_leaves(leaves: &[Hash32]) -> Hash32 {
    if leaves.is_empty() {
        return digest(b"");
    }
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        level = next_level(&level);
    }
    level[0]
}

pub fn merkle_proof_of_leaves(leaves: &[Hash32], index: usize) -> Result<Vec<ProofStep>, ChainError> {
    if index >= leaves.len() {
        return Err(ChainError::IndexOutOfRange { index, len: leaves.len() });
    }
    let mut path = Vec::new();
    let mut level = leaves.to_vec();
    let mut idx = index;
    while level.len() > 1 {
        let step = if idx % 2 == 0 {
            ProofStep { sibling: *level.get(idx + 1).unwrap_or(&level[idx]), side: Side::Right }
        } else {
            ProofStep { sibling: level[idx - 1], side: Side::Left }
        };
        path.push(step);
        level = next_level(&level);
        idx /= 2;
    }
    Ok(path)
}

pub fn verify_proof(root: &Hash32, leaf: &Hash32, path: &[ProofStep]) -> bool {
    let computed = path.iter().fold(*leaf, |acc, step| match step.side {
        Side::Right => parent(&acc, &step.sibling),
        Side::Left => parent(&step.sibling, &acc),
    });
    computed == *root
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaves(n: usize) -> Vec<Hash32> {
        (0..n).map(|i| digest(format!("leaf{i}").as_bytes())).collect()
    }

    #[test]
    fn conventions() {
        assert_eq!(merkle_root_of_leaves(&[]), digest(b""));
        let one = leaves(1);
        assert_eq!(merkle_root_of_leaves(&one), one[0]);
        assert!(merkle_proof_of_leaves(&one, 0).unwrap().is_empty());
    }

    #[test]
    fn four_leaves_by_hand() {
        let l = leaves(4);
        let cat = |a: &Hash32, b: &Hash32| {
            let mut v = a.0.to_vec();
            v.extend_from_slice(&b.0);
            digest(&v)
        };
        let expect = cat(&cat(&l[0], &l[1]), &cat(&l[2], &l[3]));
        assert_eq!(merkle_root_of_leaves(&l), expect);
    }

    #[test]
    fn three_leaves_self_pair_the_last() {
        let l = leaves(3);
        let expect = parent(&parent(&l[0], &l[1]), &parent(&l[2], &l[2]));
        assert_eq!(merkle_root_of_leaves(&l), expect);
    }

    #[test]
    fn index_out_of_range() {
        assert!(matches!(
            merkle_proof_of_leaves(&leaves(3), 3),
            Err(ChainError::IndexOutOfRange { index: 3, len: 3 })
        ));
    }
}
