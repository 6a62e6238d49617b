//! Single-pass tree construction from lexicographically sorted codes.

use rayon::prelude::*;

use super::{EncodingTree, TreeStats, MAX_LEAF_IDS};
use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};
use crate::order::ChunkOrder;

#[derive(Default)]
struct Chunk {
    bytes: Vec<u8>,
    leaf_depths: Vec<u8>,
    internal: u64,
    leaves: u64,
    postfix: u64,
    ids: u64,
}

impl Chunk {
    fn emit_internal(&mut self, chunk: u8, depth: usize) {
        self.bytes.push(chunk);
        self.bytes.push((depth as u8) << 1);
        self.internal += 1;
    }

    fn emit_leaf(&mut self, code: &[u8], depth: usize, ids: &[u32]) {
        let postfix = &code[depth + 1..];
        let mut rest = ids;
        while !rest.is_empty() {
            let take = rest.len().min(MAX_LEAF_IDS);
            self.bytes.push(code[depth]);
            self.bytes.push(((take as u8) << 1) | 1);
            self.bytes.extend_from_slice(postfix);
            for &id in &rest[..take] {
                self.bytes.extend_from_slice(&id.to_le_bytes());
            }
            self.leaf_depths.push(depth as u8);
            self.leaves += 1;
            self.postfix += postfix.len() as u64;
            self.ids += take as u64;
            rest = &rest[take..];
        }
    }
}

/// One left-to-right pass over a sorted range of codes.
///
/// The range's suffix below the last divergence ("pending tail") stays open
/// until the next code tells us which of its layers are shared. Shared layers
/// become internal records; the rest collapses into one leaf holding the
/// whole identical-code group.
fn build_range(codes: &[u8], ids: &[u32], layer_count: usize, start: usize) -> Result<Chunk> {
    let m = layer_count;
    let n = ids.len();
    let code = |i: usize| &codes[i * m..(i + 1) * m];

    let mut out = Chunk::default();
    let mut tail_start = 0usize;
    let mut group_start = 0usize;

    for i in 1..=n {
        if i < n {
            let prev = code(i - 1);
            let next = code(i);
            match next.cmp(prev) {
                std::cmp::Ordering::Equal => continue,
                std::cmp::Ordering::Less => {
                    return Err(Error::PreconditionViolation(format!(
                        "codes not sorted at position {}",
                        start + i
                    )))
                }
                std::cmp::Ordering::Greater => {}
            }
            let lcp = prev
                .iter()
                .zip(next.iter())
                .take_while(|(a, b)| a == b)
                .count();
            let group = code(group_start);
            if lcp >= tail_start {
                // Layers shared with the next code are now known to branch.
                for l in tail_start..lcp {
                    out.emit_internal(group[l], l);
                }
                out.emit_leaf(group, lcp, &ids[group_start..i]);
            } else {
                out.emit_leaf(group, tail_start, &ids[group_start..i]);
            }
            tail_start = lcp;
            group_start = i;
        } else {
            out.emit_leaf(code(group_start), tail_start, &ids[group_start..n]);
        }
    }
    Ok(out)
}

/// Splits `[0, n)` at positions where the first chunk changes so ranges hold
/// whole top-level subtrees. Range choice never affects the output bytes.
fn subtree_ranges(codes: &[u8], m: usize, n: usize, pieces: usize) -> Vec<(usize, usize)> {
    let mut ranges = Vec::new();
    let target = n.div_ceil(pieces);
    let mut begin = 0usize;
    while begin < n {
        let mut end = (begin + target).min(n);
        while end < n && codes[end * m] == codes[(end - 1) * m] {
            end += 1;
        }
        ranges.push((begin, end));
        begin = end;
    }
    ranges
}

pub(super) fn construct_impl(
    sorted: &EncodedDataset,
    order: &ChunkOrder,
    layer_offset: usize,
    threads: usize,
) -> Result<EncodingTree> {
    let layer_count = sorted.num_subspaces();
    if sorted.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if layer_count == 0 || layer_count > 127 {
        return Err(Error::ConfigError(format!(
            "layer count {layer_count} outside [1, 127]"
        )));
    }
    if layer_offset + layer_count > order.len() {
        return Err(Error::ConfigError(format!(
            "layers [{layer_offset}, {}) exceed ordering of {} layers",
            layer_offset + layer_count,
            order.len()
        )));
    }
    let n = sorted.len();
    if n > u32::MAX as usize {
        return Err(Error::ConfigError("dataset exceeds 32-bit ids".into()));
    }

    let codes = sorted.codes_flat();
    let ids = sorted.ids();

    let chunks: Vec<Chunk> = if threads > 1 && n > 1 {
        let ranges = subtree_ranges(codes, layer_count, n, threads * 4);
        ranges
            .into_par_iter()
            .map(|(b, e)| {
                build_range(
                    &codes[b * layer_count..e * layer_count],
                    &ids[b..e],
                    layer_count,
                    b,
                )
            })
            .collect::<Result<_>>()?
    } else {
        vec![build_range(codes, ids, layer_count, 0)?]
    };

    let mut bytes = Vec::with_capacity(chunks.iter().map(|c| c.bytes.len()).sum());
    let mut leaf_depths = Vec::with_capacity(chunks.iter().map(|c| c.leaf_depths.len()).sum());
    let (mut internal, mut leaves, mut postfix, mut total_ids) = (0u64, 0u64, 0u64, 0u64);
    for c in &chunks {
        bytes.extend_from_slice(&c.bytes);
        leaf_depths.extend_from_slice(&c.leaf_depths);
        internal += c.internal;
        leaves += c.leaves;
        postfix += c.postfix;
        total_ids += c.ids;
    }

    assert_eq!(total_ids, n as u64);
    assert_eq!(
        bytes.len() as u64,
        TreeStats::formula_bytes(n as u64, internal, leaves, postfix),
        "buffer length diverged from the node accounting"
    );

    Ok(EncodingTree {
        n: n as u32,
        k: sorted.codewords() as u32,
        order: order.clone(),
        layer_offset: layer_offset as u32,
        layer_count: layer_count as u32,
        bytes,
        leaf_depths,
    })
}

/// Builds a tree over all layers of `sorted`, which must already be in
/// lexicographic order under the identity of `order`'s permutation.
pub fn construct(sorted: &EncodedDataset, order: &ChunkOrder) -> Result<EncodingTree> {
    construct_impl(sorted, order, 0, 1)
}
