//! Membership registry committed to a single Merkle root.
//!
//! Hashing (Keccak-256):
//! - leaf: `H(0x00 ‖ address)`
//! - node: `H(0x01 ‖ lo ‖ hi)` with `(lo, hi)` the children in byte order
//!
//! Leaves are the addresses in ascending byte order. An unpaired node at the end of a
//! level moves up unchanged, so its path records no sibling for that level. Sorted-pair
//! hashing means proofs carry no direction bits.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, BufRead};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::ingest::Address;
use crate::keccak256;

pub const LEAF_PREFIX: u8 = 0x00;
pub const NODE_PREFIX: u8 = 0x01;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; 32]);

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Digest {
    type Err = MerkleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.trim().strip_prefix("0x").ok_or_else(|| MerkleError::BadDigest(s.to_string()))?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(body, &mut out).map_err(|_| MerkleError::BadDigest(s.to_string()))?;
        Ok(Digest(out))
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MerkleError {
    #[error("cannot build a registry from an empty set")]
    EmptySet,
    #[error("{0} is not a registry member")]
    NotMember(Address),
    #[error("{0} is already a registry member")]
    AlreadyMember(Address),
    #[error("invalid digest `{0}`")]
    BadDigest(String),
    #[error("line {line}: {reason}")]
    BadRegistryFile { line: u64, reason: String },
}

pub fn leaf_hash(addr: &Address) -> Digest {
    Digest(keccak256(&[&[LEAF_PREFIX], addr.as_bytes()]))
}

pub fn node_hash(a: &Digest, b: &Digest) -> Digest {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    Digest(keccak256(&[&[NODE_PREFIX], &lo.0, &hi.0]))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleProof {
    pub address: Address,
    /// Sibling digests from the leaf level upward.
    pub siblings: Vec<Digest>,
}

impl MerkleProof {
    /// Leaf hash plus one node hash per sibling.
    pub fn hash_ops(&self) -> usize {
        1 + self.siblings.len()
    }
}

/// Proof JSON with the root it was issued against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofDocument {
    pub address: Address,
    pub siblings: Vec<Digest>,
    pub root: Digest,
}

impl ProofDocument {
    pub fn new(proof: MerkleProof, root: Digest) -> Self {
        ProofDocument { address: proof.address, siblings: proof.siblings, root }
    }

    pub fn proof(&self) -> MerkleProof {
        MerkleProof { address: self.address, siblings: self.siblings.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MerkleRegistry {
    leaves: Vec<Address>,
    /// `levels[0]` are leaf hashes; the last level holds only the root.
    levels: Vec<Vec<Digest>>,
}

impl MerkleRegistry {
    pub fn build<'a>(addresses: impl IntoIterator<Item = &'a Address>) -> Result<Self, MerkleError> {
        let set: BTreeSet<Address> = addresses.into_iter().copied().collect();
        Self::from_sorted(set.into_iter().collect())
    }

    fn from_sorted(leaves: Vec<Address>) -> Result<Self, MerkleError> {
        if leaves.is_empty() {
            return Err(MerkleError::EmptySet);
        }
        let mut levels = vec![leaves.iter().map(leaf_hash).collect::<Vec<_>>()];
        while levels.last().expect("nonempty").len() > 1 {
            let cur = levels.last().expect("nonempty");
            let next = cur
                .chunks(2)
                .map(|pair| match pair {
                    [a, b] => node_hash(a, b),
                    [single] => *single,
                    _ => unreachable!(),
                })
                .collect();
            levels.push(next);
        }
        Ok(MerkleRegistry { leaves, levels })
    }

    pub fn root(&self) -> Digest {
        self.levels.last().expect("nonempty")[0]
    }

    pub fn leaves(&self) -> &[Address] {
        &self.leaves
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    /// Number of hashing levels above the leaves: `ceil(log2 n)`, 0 for a single leaf.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn contains(&self, addr: &Address) -> bool {
        self.leaves.binary_search(addr).is_ok()
    }

    pub fn prove(&self, addr: &Address) -> Result<MerkleProof, MerkleError> {
        let mut idx = self.leaves.binary_search(addr).map_err(|_| MerkleError::NotMember(*addr))?;
        let mut siblings = Vec::with_capacity(self.depth());
        for level in &self.levels[..self.levels.len() - 1] {
            let sib = idx ^ 1;
            if sib < level.len() {
                siblings.push(level[sib]);
            }
            idx /= 2;
        }
        Ok(MerkleProof { address: *addr, siblings })
    }

    /// Rebuilds over `leaves ∪ add ∖ remove`.
    pub fn update(&self, add: &BTreeSet<Address>, remove: &BTreeSet<Address>) -> Result<Self, MerkleError> {
        if let Some(a) = remove.iter().find(|a| !self.contains(a)) {
            return Err(MerkleError::NotMember(*a));
        }
        if let Some(a) = add.iter().find(|a| self.contains(a)) {
            return Err(MerkleError::AlreadyMember(*a));
        }
        let mut set: BTreeSet<Address> = self.leaves.iter().copied().collect();
        set.extend(add.iter().copied());
        for a in remove {
            set.remove(a);
        }
        Self::from_sorted(set.into_iter().collect())
    }

    /// Newline-delimited sorted addresses.
    pub fn to_registry_file(&self) -> String {
        let mut s = String::with_capacity(self.leaves.len() * 43);
        for a in &self.leaves {
            s.push_str(&a.to_string());
            s.push('\n');
        }
        s
    }

    pub fn read_registry_file<R: io::Read>(input: R) -> Result<Self, MerkleError> {
        let mut set = BTreeSet::new();
        for (i, line) in io::BufReader::new(input).lines().enumerate() {
            let line = line.map_err(|e| MerkleError::BadRegistryFile { line: i as u64 + 1, reason: e.to_string() })?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let a = t
                .parse::<Address>()
                .map_err(|e| MerkleError::BadRegistryFile { line: i as u64 + 1, reason: e.to_string() })?;
            set.insert(a);
        }
        Self::from_sorted(set.into_iter().collect())
    }
}

/// Folds the proof from the leaf hash; never panics on malformed input.
pub fn verify(root: &Digest, proof: &MerkleProof) -> bool {
    let computed = proof.siblings.iter().fold(leaf_hash(&proof.address), |acc, s| node_hash(&acc, s));
    computed == *root
}
