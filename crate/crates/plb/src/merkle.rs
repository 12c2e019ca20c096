//! Ordered Merkle tree over published events, keyed by (context, round,
//! seq). Provides inclusion proofs, range-completeness proofs (including
//! non-existence) and root-chain verification.
//!
//! Conventions, pinned because both alternatives exist in deployed logs:
//! leaf hash = H(0x00 || enc(leaf)), interior hash = H(0x01 || left ||
//! right), and an odd node at a level is promoted unchanged to the next
//! level (not duplicated). The empty tree commits to H(0x00).

use crate::encoding::{put_u32, put_u64, Reader};
use crate::hash::{sha256, sha256_parts, Hash32};
use crate::types::RoundRoot;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const LEAF_PREFIX: u8 = 0x00;
const NODE_PREFIX: u8 = 0x01;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MerkleError {
    #[error("leaves must be sorted ascending by key with no duplicates")]
    UnsortedLeaves,
    #[error("leaf index out of range")]
    IndexOutOfRange,
    #[error("invalid key range: lo > hi")]
    InvalidRange,
    #[error("malformed proof encoding")]
    MalformedProof,
}

/// A committed leaf: the ordering key plus the hash of the event's leaf
/// encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeLeaf {
    pub key: Vec<u8>,
    pub value_hash: Hash32,
}

impl TreeLeaf {
    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_u32(&mut out, self.key.len() as u32);
        out.extend_from_slice(&self.key);
        out.extend_from_slice(&self.value_hash);
        out
    }
}

/// Which side of the path node the sibling hash sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofStep {
    pub side: Side,
    pub hash: Hash32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionProof {
    pub leaf_index: u64,
    pub path: Vec<ProofStep>,
}

/// Inclusion proof for a leaf just outside a query range; carries the full
/// leaf so the verifier can check that its key really lies outside.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryProof {
    pub leaf: TreeLeaf,
    pub proof: InclusionProof,
}

/// Proof that a returned member list is exactly the set of leaves within a
/// key range: every member is included, the boundary leaves lie strictly
/// outside the range, and all indices form one contiguous interval.
///
/// `tree_size` pins the tree shape. With odd-node promotion a truncated
/// audit path can otherwise be replayed at a smaller claimed index, which
/// would let a prover drop members; forcing every path against one shared
/// leaf count closes that gap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletenessProof {
    pub tree_size: u64,
    pub member_proofs: Vec<InclusionProof>,
    pub left_boundary: Option<BoundaryProof>,
    pub right_boundary: Option<BoundaryProof>,
}

pub fn leaf_hash(leaf: &TreeLeaf) -> Hash32 {
    sha256_parts(&[&[LEAF_PREFIX], &leaf.encode()])
}

fn node_hash(left: &Hash32, right: &Hash32) -> Hash32 {
    sha256_parts(&[&[NODE_PREFIX], left, right])
}

/// Root of the empty tree.
pub fn empty_root() -> Hash32 {
    sha256(&[LEAF_PREFIX])
}

fn check_sorted(leaves: &[TreeLeaf]) -> Result<(), MerkleError> {
    if leaves.windows(2).any(|w| w[0].key >= w[1].key) {
        return Err(MerkleError::UnsortedLeaves);
    }
    Ok(())
}

/// Deterministic root over leaves sorted ascending by key.
pub fn build_tree(leaves: &[TreeLeaf]) -> Result<Hash32, MerkleError> {
    check_sorted(leaves)?;
    if leaves.is_empty() {
        return Ok(empty_root());
    }
    let mut level: Vec<Hash32> = leaves.iter().map(leaf_hash).collect();
    while level.len() > 1 {
        let mut next = Vec::with_capacity((level.len() + 1) / 2);
        for pair in level.chunks(2) {
            match pair {
                [l, r] => next.push(node_hash(l, r)),
                [odd] => next.push(*odd),
                _ => unreachable!(),
            }
        }
        level = next;
    }
    Ok(level[0])
}

pub fn prove_inclusion(leaves: &[TreeLeaf], index: usize) -> Result<InclusionProof, MerkleError> {
    check_sorted(leaves)?;
    if index >= leaves.len() {
        return Err(MerkleError::IndexOutOfRange);
    }
    let mut path = Vec::new();
    let mut level: Vec<Hash32> = leaves.iter().map(leaf_hash).collect();
    let mut idx = index;
    while level.len() > 1 {
        if idx % 2 == 0 {
            if idx + 1 < level.len() {
                path.push(ProofStep { side: Side::Right, hash: level[idx + 1] });
            }
            // else: promoted, no sibling at this level
        } else {
            path.push(ProofStep { side: Side::Left, hash: level[idx - 1] });
        }
        let mut next = Vec::with_capacity((level.len() + 1) / 2);
        for pair in level.chunks(2) {
            match pair {
                [l, r] => next.push(node_hash(l, r)),
                [odd] => next.push(*odd),
                _ => unreachable!(),
            }
        }
        level = next;
        idx /= 2;
    }
    Ok(InclusionProof { leaf_index: index as u64, path })
}

fn fold_path(leaf: &TreeLeaf, path: &[ProofStep]) -> Hash32 {
    let mut h = leaf_hash(leaf);
    for step in path {
        h = match step.side {
            Side::Left => node_hash(&step.hash, &h),
            Side::Right => node_hash(&h, &step.hash),
        };
    }
    h
}

/// Standalone inclusion check: the path must hash to the root. With
/// promotion, sibling sides cannot be predicted from the index alone, so
/// positional claims are only validated by the shape-aware check below.
pub fn verify_inclusion(root: &Hash32, leaf: &TreeLeaf, proof: &InclusionProof) -> bool {
    fold_path(leaf, &proof.path) == root.as_slice()
}

/// Inclusion check with the tree shape forced by `tree_size`: the path
/// length and every sibling side are exactly those of position
/// `proof.leaf_index` in a tree of `tree_size` leaves. Used by range
/// verification, where index claims carry completeness weight.
fn verify_inclusion_in_shape(
    root: &Hash32,
    leaf: &TreeLeaf,
    proof: &InclusionProof,
    tree_size: u64,
) -> bool {
    if tree_size == 0 || proof.leaf_index >= tree_size {
        return false;
    }
    let mut idx = proof.leaf_index;
    let mut size = tree_size;
    let mut h = leaf_hash(leaf);
    let mut steps = proof.path.iter();
    while size > 1 {
        let promoted = idx == size - 1 && size % 2 == 1;
        if !promoted {
            let Some(step) = steps.next() else { return false };
            let expected = if idx % 2 == 0 { Side::Right } else { Side::Left };
            if step.side != expected {
                return false;
            }
            h = match step.side {
                Side::Left => node_hash(&step.hash, &h),
                Side::Right => node_hash(&h, &step.hash),
            };
        }
        idx /= 2;
        size = (size + 1) / 2;
    }
    steps.next().is_none() && h == *root
}

/// Produce the members of `[key_lo, key_hi]` together with a completeness
/// proof. Empty ranges are proven by the two adjacent boundary leaves (or
/// by the empty-tree root).
pub fn prove_range(
    leaves: &[TreeLeaf],
    key_lo: &[u8],
    key_hi: &[u8],
) -> Result<(Vec<TreeLeaf>, CompletenessProof), MerkleError> {
    if key_lo > key_hi {
        return Err(MerkleError::InvalidRange);
    }
    check_sorted(leaves)?;
    let first = leaves.partition_point(|l| l.key.as_slice() < key_lo);
    let last = leaves.partition_point(|l| l.key.as_slice() <= key_hi); // exclusive
    let members: Vec<TreeLeaf> = leaves[first..last].to_vec();
    let member_proofs = (first..last)
        .map(|i| prove_inclusion(leaves, i))
        .collect::<Result<Vec<_>, _>>()?;
    let left_boundary = if first > 0 {
        Some(BoundaryProof {
            leaf: leaves[first - 1].clone(),
            proof: prove_inclusion(leaves, first - 1)?,
        })
    } else {
        None
    };
    let right_boundary = if last < leaves.len() {
        Some(BoundaryProof { leaf: leaves[last].clone(), proof: prove_inclusion(leaves, last)? })
    } else {
        None
    };
    Ok((
        members,
        CompletenessProof {
            tree_size: leaves.len() as u64,
            member_proofs,
            left_boundary,
            right_boundary,
        },
    ))
}

/// Accepts iff `members` is exactly the set of leaves with keys in
/// `[key_lo, key_hi]` in the tree committed to by `root`.
pub fn verify_range(
    root: &Hash32,
    key_lo: &[u8],
    key_hi: &[u8],
    members: &[TreeLeaf],
    proof: &CompletenessProof,
) -> bool {
    if key_lo > key_hi {
        return false;
    }
    let n = proof.tree_size;
    if n == 0 {
        return members.is_empty()
            && proof.member_proofs.is_empty()
            && proof.left_boundary.is_none()
            && proof.right_boundary.is_none()
            && *root == empty_root();
    }
    if members.len() != proof.member_proofs.len() {
        return false;
    }
    // Members: in range, strictly ascending, consecutive indices, each
    // bound to the root under the shared tree shape.
    for (i, (leaf, ip)) in members.iter().zip(&proof.member_proofs).enumerate() {
        if leaf.key.as_slice() < key_lo || leaf.key.as_slice() > key_hi {
            return false;
        }
        if i > 0 {
            if members[i - 1].key >= leaf.key {
                return false;
            }
            if ip.leaf_index != proof.member_proofs[i - 1].leaf_index + 1 {
                return false;
            }
        }
        if !verify_inclusion_in_shape(root, leaf, ip, n) {
            return false;
        }
    }
    // Boundaries: strictly outside the range, verified, and adjacent to the
    // member interval so no in-range leaf can hide between them.
    let first_idx = members.first().map(|_| proof.member_proofs[0].leaf_index);
    let last_idx = members.last().map(|_| proof.member_proofs[members.len() - 1].leaf_index);
    match &proof.left_boundary {
        Some(b) => {
            if b.leaf.key.as_slice() >= key_lo {
                return false;
            }
            if !verify_inclusion_in_shape(root, &b.leaf, &b.proof, n) {
                return false;
            }
            match first_idx {
                Some(f) if b.proof.leaf_index + 1 == f => {}
                Some(_) => return false,
                None => {} // adjacency to the right boundary checked below
            }
        }
        None => {
            // No leaf below the range: members (or the right boundary) must
            // start at index 0.
            let leftmost = first_idx
                .or_else(|| proof.right_boundary.as_ref().map(|b| b.proof.leaf_index));
            match leftmost {
                Some(0) => {}
                Some(_) => return false,
                None => return false, // n > 0 but nothing proven at all
            }
        }
    }
    match &proof.right_boundary {
        Some(b) => {
            if b.leaf.key.as_slice() <= key_hi {
                return false;
            }
            if !verify_inclusion_in_shape(root, &b.leaf, &b.proof, n) {
                return false;
            }
            let left_of_right = last_idx
                .or_else(|| proof.left_boundary.as_ref().map(|lb| lb.proof.leaf_index));
            match left_of_right {
                Some(i) if i + 1 == b.proof.leaf_index => {}
                Some(_) => return false,
                None if b.proof.leaf_index == 0 => {} // empty range at the far left
                None => return false,
            }
        }
        None => {
            // No leaf above the range: members (or the left boundary) must
            // end at the last index.
            let rightmost = last_idx
                .or_else(|| proof.left_boundary.as_ref().map(|b| b.proof.leaf_index));
            match rightmost {
                Some(i) if i == n - 1 => {}
                _ => return false,
            }
        }
    }
    true
}

/// True iff each prev_hash matches the hash of the preceding root and
/// rounds increase by exactly 1. A single genesis root must carry an
/// all-zero prev_hash.
pub fn verify_root_chain(roots: &[RoundRoot]) -> bool {
    if roots.is_empty() {
        return false;
    }
    if roots[0].round == 0 && roots[0].prev_hash != crate::hash::ZERO_HASH {
        return false;
    }
    roots.windows(2).all(|w| w[1].round == w[0].round + 1 && w[1].prev_hash == w[0].hash())
}

// -- serialization ----------------------------------------------------------
// member count u32, then each inclusion proof as (leaf_index u64, path
// length u16, per step 1 side byte || 32-byte hash); boundaries flagged by
// one presence byte each; tree_size u64 trails the header.

fn put_inclusion(out: &mut Vec<u8>, p: &InclusionProof) {
    put_u64(out, p.leaf_index);
    out.extend_from_slice(&(p.path.len() as u16).to_be_bytes());
    for step in &p.path {
        out.push(match step.side {
            Side::Left => 0,
            Side::Right => 1,
        });
        out.extend_from_slice(&step.hash);
    }
}

fn put_boundary(out: &mut Vec<u8>, b: &Option<BoundaryProof>) {
    match b {
        None => out.push(0),
        Some(b) => {
            out.push(1);
            put_u32(out, b.leaf.key.len() as u32);
            out.extend_from_slice(&b.leaf.key);
            out.extend_from_slice(&b.leaf.value_hash);
            put_inclusion(out, &b.proof);
        }
    }
}

pub fn encode_completeness_proof(p: &CompletenessProof) -> Vec<u8> {
    let mut out = Vec::new();
    put_u32(&mut out, p.member_proofs.len() as u32);
    put_u64(&mut out, p.tree_size);
    for ip in &p.member_proofs {
        put_inclusion(&mut out, ip);
    }
    put_boundary(&mut out, &p.left_boundary);
    put_boundary(&mut out, &p.right_boundary);
    out
}

fn read_inclusion(r: &mut Reader) -> Option<InclusionProof> {
    let leaf_index = r.u64()?;
    let len = u16::from_be_bytes(r.take(2)?.try_into().unwrap());
    let mut path = Vec::with_capacity(len as usize);
    for _ in 0..len {
        let side = match r.take(1)?[0] {
            0 => Side::Left,
            1 => Side::Right,
            _ => return None,
        };
        let hash: Hash32 = r.take(32)?.try_into().unwrap();
        path.push(ProofStep { side, hash });
    }
    Some(InclusionProof { leaf_index, path })
}

fn read_boundary(r: &mut Reader) -> Option<Option<BoundaryProof>> {
    match r.take(1)?[0] {
        0 => Some(None),
        1 => {
            let klen = r.u32()? as usize;
            let key = r.take(klen)?.to_vec();
            let value_hash: Hash32 = r.take(32)?.try_into().unwrap();
            let proof = read_inclusion(r)?;
            Some(Some(BoundaryProof { leaf: TreeLeaf { key, value_hash }, proof }))
        }
        _ => None,
    }
}

pub fn decode_completeness_proof(buf: &[u8]) -> Result<CompletenessProof, MerkleError> {
    let mut r = Reader::new(buf);
    let inner = |r: &mut Reader| -> Option<CompletenessProof> {
        let count = r.u32()?;
        let tree_size = r.u64()?;
        let mut member_proofs = Vec::with_capacity(count as usize);
        for _ in 0..count {
            member_proofs.push(read_inclusion(r)?);
        }
        let left_boundary = read_boundary(r)?;
        let right_boundary = read_boundary(r)?;
        Some(CompletenessProof { tree_size, member_proofs, left_boundary, right_boundary })
    };
    match inner(&mut r) {
        Some(p) if r.done() => Ok(p),
        _ => Err(MerkleError::MalformedProof),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::sha256_parts;

    fn leaf(key: &[u8], v: u8) -> TreeLeaf {
        TreeLeaf { key: key.to_vec(), value_hash: [v; 32] }
    }

    #[test]
    fn empty_tree_root_is_hash_of_leaf_prefix() {
        assert_eq!(build_tree(&[]).unwrap(), sha256(&[0x00]));
    }

    #[test]
    fn single_leaf_root_is_leaf_hash() {
        let l = leaf(b"a", 1);
        assert_eq!(build_tree(std::slice::from_ref(&l)).unwrap(), leaf_hash(&l));
    }

    #[test]
    fn four_leaf_root_matches_hand_computation() {
        let ls: Vec<TreeLeaf> = (0..4).map(|i| leaf(&[i], i)).collect();
        // Independent recomputation with raw hash calls.
        let h: Vec<Hash32> = ls
            .iter()
            .map(|l| {
                let mut enc = vec![0x00];
                enc.extend_from_slice(&(l.key.len() as u32).to_be_bytes());
                enc.extend_from_slice(&l.key);
                enc.extend_from_slice(&l.value_hash);
                sha256(&enc)
            })
            .collect();
        let n01 = sha256_parts(&[&[0x01], &h[0], &h[1]]);
        let n23 = sha256_parts(&[&[0x01], &h[2], &h[3]]);
        let root = sha256_parts(&[&[0x01], &n01, &n23]);
        assert_eq!(build_tree(&ls).unwrap(), root);
    }

    #[test]
    fn unsorted_leaves_rejected() {
        let ls = vec![leaf(b"b", 0), leaf(b"a", 1)];
        assert_eq!(build_tree(&ls).unwrap_err(), MerkleError::UnsortedLeaves);
        let dup = vec![leaf(b"a", 0), leaf(b"a", 1)];
        assert_eq!(build_tree(&dup).unwrap_err(), MerkleError::UnsortedLeaves);
    }

    #[test]
    fn inclusion_roundtrip_all_sizes() {
        for n in 1usize..=9 {
            let ls: Vec<TreeLeaf> = (0..n).map(|i| leaf(&[i as u8], i as u8)).collect();
            let root = build_tree(&ls).unwrap();
            for i in 0..n {
                let p = prove_inclusion(&ls, i).unwrap();
                assert!(p.path.len() as u32 <= (n as f64).log2().ceil() as u32 + 1);
                assert!(verify_inclusion(&root, &ls[i], &p), "n={n} i={i}");
                // wrong leaf with right proof
                let other = &ls[(i + 1) % n];
                if n > 1 {
                    assert!(!verify_inclusion(&root, other, &p));
                }
            }
        }
    }

    #[test]
    fn single_leaf_empty_path_verifies() {
        let l = leaf(b"a", 7);
        let root = build_tree(std::slice::from_ref(&l)).unwrap();
        let p = prove_inclusion(std::slice::from_ref(&l), 0).unwrap();
        assert!(p.path.is_empty());
        assert!(verify_inclusion(&root, &l, &p));
    }

    #[test]
    fn bit_flipped_audit_paths_rejected() {
        for n in 2usize..=6 {
            let ls: Vec<TreeLeaf> = (0..n).map(|i| leaf(&[i as u8], i as u8)).collect();
            let root = build_tree(&ls).unwrap();
            for i in 0..n {
                let p = prove_inclusion(&ls, i).unwrap();
                for step in 0..p.path.len() {
                    for byte in 0..32 {
                        for bit in 0..8 {
                            let mut bad = p.clone();
                            bad.path[step].hash[byte] ^= 1 << bit;
                            assert!(!verify_inclusion(&root, &ls[i], &bad));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn index_out_of_range() {
        let ls = vec![leaf(b"a", 0)];
        assert_eq!(prove_inclusion(&ls, 1).unwrap_err(), MerkleError::IndexOutOfRange);
    }

    #[test]
    fn range_proof_empty_tree() {
        let (members, proof) = prove_range(&[], b"a", b"z").unwrap();
        assert!(members.is_empty());
        assert!(verify_range(&empty_root(), b"a", b"z", &members, &proof));
        // wrong root
        assert!(!verify_range(&[1u8; 32], b"a", b"z", &members, &proof));
    }

    #[test]
    fn range_proof_full_cover() {
        let ls: Vec<TreeLeaf> = (0..5).map(|i| leaf(&[i], i)).collect();
        let root = build_tree(&ls).unwrap();
        let (members, proof) = prove_range(&ls, &[0], &[4]).unwrap();
        assert_eq!(members.len(), 5);
        assert!(proof.left_boundary.is_none() && proof.right_boundary.is_none());
        assert!(verify_range(&root, &[0], &[4], &members, &proof));
    }

    #[test]
    fn range_proof_dropped_member_rejected() {
        let ls: Vec<TreeLeaf> = (0..5).map(|i| leaf(&[i], i)).collect();
        let root = build_tree(&ls).unwrap();
        let (members, proof) = prove_range(&ls, &[1], &[3]).unwrap();
        assert_eq!(members.len(), 3);
        assert!(verify_range(&root, &[1], &[3], &members, &proof));
        for drop in 0..3 {
            let mut m = members.clone();
            let mut p = proof.clone();
            m.remove(drop);
            p.member_proofs.remove(drop);
            assert!(!verify_range(&root, &[1], &[3], &m, &p));
        }
    }

    // Brute force: over a 5-leaf tree and a fixed range, the honest proof
    // accepts exactly the true member subset and no other subset of leaves.
    #[test]
    fn only_exact_subset_verifies() {
        let ls: Vec<TreeLeaf> = (0..5).map(|i| leaf(&[i], i)).collect();
        let root = build_tree(&ls).unwrap();
        let (true_members, proof) = prove_range(&ls, &[1], &[3]).unwrap();
        for mask in 0u32..32 {
            let subset: Vec<TreeLeaf> =
                (0..5).filter(|i| mask & (1 << i) != 0).map(|i| ls[i].clone()).collect();
            let ok = verify_range(&root, &[1], &[3], &subset, &proof);
            assert_eq!(ok, subset == true_members, "mask={mask}");
        }
    }

    #[test]
    fn empty_range_between_leaves() {
        let ls: Vec<TreeLeaf> = [0u8, 2, 4, 6].iter().map(|&i| leaf(&[i], i)).collect();
        let root = build_tree(&ls).unwrap();
        let (members, proof) = prove_range(&ls, &[3], &[3]).unwrap();
        assert!(members.is_empty());
        assert!(verify_range(&root, &[3], &[3], &members, &proof));
        // ranges off either end
        let (m, p) = prove_range(&ls, &[7], &[9]).unwrap();
        assert!(m.is_empty() && verify_range(&root, &[7], &[9], &m, &p));
        let (m, p) = prove_range(&ls, &[], &[]).unwrap();
        assert!(m.is_empty() && verify_range(&root, &[], &[], &m, &p));
    }

    // Regression for the promotion replay: a promoted leaf's truncated path
    // must not verify at a smaller index inside a range proof bundle.
    #[test]
    fn promoted_leaf_cannot_claim_smaller_index() {
        let ls: Vec<TreeLeaf> = (0..3).map(|i| leaf(&[i], i)).collect();
        let root = build_tree(&ls).unwrap();
        // Forge: omit leaf 1 from range [1,2]; present leaf 2 at index 1
        // with its (truncated) honest path, boundary leaf 0 at index 0.
        let p2 = prove_inclusion(&ls, 2).unwrap();
        let forged = CompletenessProof {
            tree_size: 2,
            member_proofs: vec![InclusionProof { leaf_index: 1, path: p2.path.clone() }],
            left_boundary: Some(BoundaryProof {
                leaf: ls[0].clone(),
                proof: prove_inclusion(&ls, 0).unwrap(),
            }),
            right_boundary: None,
        };
        assert!(!verify_range(&root, &[1], &[2], std::slice::from_ref(&ls[2]), &forged));
        let forged3 = CompletenessProof { tree_size: 3, ..forged };
        assert!(!verify_range(&root, &[1], &[2], std::slice::from_ref(&ls[2]), &forged3));
    }

    #[test]
    fn root_chain_verification() {
        let g = RoundRoot::genesis(empty_root());
        assert!(verify_root_chain(&[g]));
        let r1 = RoundRoot { round: 1, tree_root: [1; 32], prev_hash: g.hash() };
        let r2 = RoundRoot { round: 2, tree_root: [2; 32], prev_hash: r1.hash() };
        assert!(verify_root_chain(&[g, r1, r2]));
        // altered tree_root mid-chain
        let mut bad = r1;
        bad.tree_root = [9; 32];
        assert!(!verify_root_chain(&[g, bad, r2]));
        // round gap
        let r3 = RoundRoot { round: 4, tree_root: [3; 32], prev_hash: r2.hash() };
        assert!(!verify_root_chain(&[g, r1, r2, r3]));
        // genesis with nonzero prev
        let mut bg = g;
        bg.prev_hash = [1; 32];
        assert!(!verify_root_chain(&[bg]));
        assert!(!verify_root_chain(&[]));
    }

    #[test]
    fn proof_serialization_roundtrip() {
        let ls: Vec<TreeLeaf> = (0..7).map(|i| leaf(&[i], i)).collect();
        for (lo, hi) in [(&[2u8][..], &[5u8][..]), (&[0], &[6]), (&[3], &[3])] {
            let (_, proof) = prove_range(&ls, lo, hi).unwrap();
            let bytes = encode_completeness_proof(&proof);
            assert_eq!(decode_completeness_proof(&bytes).unwrap(), proof);
        }
        assert!(decode_completeness_proof(&[1, 2, 3]).is_err());
    }
}
