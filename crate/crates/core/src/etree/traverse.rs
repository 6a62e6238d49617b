//! Depth-first distance computation over the flat buffer.

use std::collections::HashMap;

use super::EncodingTree;
use crate::dataset::SlotMap;
use crate::error::{Error, Result};
use crate::table::DistanceTable;

/// Running partial ADC sums along the active root-to-node path.
///
/// `partials[l]` is the sum of table lookups for layers `0..=l` of the
/// current path, accumulated in f64.
#[derive(Debug)]
pub struct DistanceContext {
    partials: Vec<f64>,
}

impl DistanceContext {
    pub fn new(layers: usize) -> Self {
        Self {
            partials: vec![0.0; layers],
        }
    }

    /// Partial sum above `depth` (zero at the root).
    #[inline]
    pub fn base(&self, depth: usize) -> f64 {
        if depth == 0 {
            0.0
        } else {
            self.partials[depth - 1]
        }
    }

    /// Extends the path with a lookup value at `depth`.
    #[inline]
    pub fn extend(&mut self, depth: usize, value: f64) -> f64 {
        let v = self.base(depth) + value;
        self.partials[depth] = v;
        v
    }
}

pub(super) trait Tally {
    fn add(&mut self, lookups: u64);
}

pub(super) struct NoTally;

impl Tally for NoTally {
    #[inline]
    fn add(&mut self, _: u64) {}
}

pub(super) struct CountTally(pub u64);

impl Tally for CountTally {
    #[inline]
    fn add(&mut self, lookups: u64) {
        self.0 += lookups;
    }
}

trait SlotLookup {
    fn slot(&self, id: u32) -> usize;
}

struct IdentitySlots;

impl SlotLookup for IdentitySlots {
    #[inline]
    fn slot(&self, id: u32) -> usize {
        id as usize
    }
}

struct MappedSlots<'a>(&'a HashMap<u32, u32>);

impl SlotLookup for MappedSlots<'_> {
    #[inline]
    fn slot(&self, id: u32) -> usize {
        self.0[&id] as usize
    }
}

pub(super) fn run<T: Tally>(
    tree: &EncodingTree,
    table: &DistanceTable,
    slots: &SlotMap,
    out: &mut [f32],
    tally: &mut T,
) -> Result<()> {
    if out.len() != tree.len() || slots.len() != tree.len() {
        return Err(Error::ConfigError(format!(
            "tree holds {} ids, output has {} slots for {} ids",
            tree.len(),
            out.len(),
            slots.len()
        )));
    }
    let rows = tree.table_rows(table)?;
    match slots {
        SlotMap::Identity(_) => walk(tree, &rows, &IdentitySlots, out, tally),
        SlotMap::Mapped(map) => walk(tree, &rows, &MappedSlots(map), out, tally),
    }
}

fn walk<S: SlotLookup, T: Tally>(
    tree: &EncodingTree,
    rows: &[&[f32]],
    slots: &S,
    out: &mut [f32],
    tally: &mut T,
) -> Result<()> {
    let bytes = tree.bytes();
    let depths = tree.leaf_depths();
    let layers = tree.layer_count();
    let mut ctx = DistanceContext::new(layers);
    let mut pos = 0usize;
    let mut leaf_idx = 0usize;

    while pos < bytes.len() {
        let chunk = bytes[pos] as usize;
        let union = bytes[pos + 1];
        if union & 1 == 0 {
            let depth = (union >> 1) as usize;
            ctx.extend(depth, rows[depth][chunk] as f64);
            tally.add(1);
            pos += 2;
        } else {
            let count = (union >> 1) as usize;
            let depth = depths[leaf_idx] as usize;
            leaf_idx += 1;
            let postfix_len = layers - depth - 1;
            let postfix_end = pos + 2 + postfix_len;
            let mut d = ctx.base(depth) + rows[depth][chunk] as f64;
            for (j, &c) in bytes[pos + 2..postfix_end].iter().enumerate() {
                d += rows[depth + 1 + j][c as usize] as f64;
            }
            tally.add(1 + postfix_len as u64);
            let dist = d as f32;
            let ids_end = postfix_end + 4 * count;
            for raw in bytes[postfix_end..ids_end].chunks_exact(4) {
                let id = u32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]);
                out[slots.slot(id)] = dist;
            }
            pos = ids_end;
        }
    }
    Ok(())
}
