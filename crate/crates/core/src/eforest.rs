//! Encoding forests: several trees over disjoint chunk-layer ranges.
//!
//! Each tree produces partial distances for its layers; the final distance
//! is the per-slot sum of the partial arrays. Memory grows by one id copy
//! per extra tree.

use rayon::prelude::*;

use crate::dataset::{EncodedDataset, SlotMap};
use crate::error::{Error, Result};
use crate::etree::{construct_with_threads, EncodingTree, TreeStats};
use crate::order::{sort_projected, ChunkOrder};
use crate::table::DistanceTable;

/// Trees shorter than this tend to cost more in array summation than they
/// save in lookups.
pub const MIN_RECOMMENDED_LAYERS: usize = 4;

/// Contiguous layer ranges partitioning `[0, M)`, one per tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestConfig {
    splits: Vec<(usize, usize)>, // (offset, len)
}

impl ForestConfig {
    /// Splits M layers into `trees` near-even contiguous ranges.
    pub fn even(num_layers: usize, trees: usize) -> Result<Self> {
        if trees == 0 || trees > num_layers {
            return Err(Error::ConfigError(format!(
                "cannot split {num_layers} layers into {trees} trees"
            )));
        }
        let base = num_layers / trees;
        let extra = num_layers % trees;
        let mut splits = Vec::with_capacity(trees);
        let mut offset = 0;
        for t in 0..trees {
            let len = base + usize::from(t < extra);
            splits.push((offset, len));
            offset += len;
        }
        Self::from_splits(num_layers, splits)
    }

    /// Validates explicit ranges: disjoint, contiguous, covering `[0, M)`.
    pub fn from_splits(num_layers: usize, splits: Vec<(usize, usize)>) -> Result<Self> {
        if splits.is_empty() {
            return Err(Error::ConfigError("forest needs at least one tree".into()));
        }
        let mut expect = 0usize;
        for &(offset, len) in &splits {
            if offset != expect || len == 0 {
                return Err(Error::ConfigError(format!(
                    "ranges must tile [0, {num_layers}); got offset {offset} len {len}, expected offset {expect}"
                )));
            }
            expect += len;
        }
        if expect != num_layers {
            return Err(Error::ConfigError(format!(
                "ranges cover [0, {expect}) instead of [0, {num_layers})"
            )));
        }
        if let Some(&(o, l)) = splits.iter().find(|&&(_, l)| l < MIN_RECOMMENDED_LAYERS) {
            log::warn!(
                "forest tree over layers [{o}, {}) is shorter than {MIN_RECOMMENDED_LAYERS} chunks; \
                 summation overhead may outweigh the savings",
                o + l
            );
        }
        Ok(Self { splits })
    }

    pub fn trees(&self) -> usize {
        self.splits.len()
    }

    pub fn splits(&self) -> &[(usize, usize)] {
        &self.splits
    }
}

/// T encoding trees over disjoint layer ranges of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingForest {
    trees: Vec<EncodingTree>,
    n: usize,
    k: usize,
    order: ChunkOrder,
}

/// Per-tree partial distance arrays, preallocated once and reused across
/// queries.
#[derive(Debug)]
pub struct ForestScratch {
    partials: Vec<Vec<f32>>,
}

impl EncodingForest {
    /// Builds one tree per configured range. Every tree stores all N ids.
    pub fn build(
        ds: &EncodedDataset,
        order: &ChunkOrder,
        config: &ForestConfig,
        threads: usize,
    ) -> Result<Self> {
        if order.len() != ds.num_subspaces() {
            return Err(Error::ConfigError(format!(
                "ordering over {} layers for {}-chunk codes",
                order.len(),
                ds.num_subspaces()
            )));
        }
        let trees = config
            .splits
            .iter()
            .map(|&(offset, len)| {
                let projected = sort_projected(ds, order, offset, len)?;
                construct_with_threads(&projected, order, offset, threads)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            trees,
            n: ds.len(),
            k: ds.codewords(),
            order: order.clone(),
        })
    }

    /// Wraps already-built trees, checking they tile the layer range and
    /// agree on the dataset.
    pub fn from_trees(trees: Vec<EncodingTree>) -> Result<Self> {
        let first = trees
            .first()
            .ok_or_else(|| Error::ConfigError("forest needs at least one tree".into()))?;
        let order = first.chunk_order().clone();
        let n = first.len();
        let k = first.codewords();
        let mut expect = 0usize;
        for tree in &trees {
            if tree.chunk_order() != &order || tree.len() != n || tree.codewords() != k {
                return Err(Error::ConfigError(
                    "forest trees disagree on dataset or ordering".into(),
                ));
            }
            if tree.layer_offset() != expect {
                return Err(Error::ConfigError(format!(
                    "tree at layer {} does not continue the previous range (expected {expect})",
                    tree.layer_offset()
                )));
            }
            expect += tree.layer_count();
        }
        if expect != order.len() {
            return Err(Error::ConfigError(format!(
                "trees cover {expect} of {} layers",
                order.len()
            )));
        }
        Ok(Self { trees, n, k, order })
    }

    pub fn trees(&self) -> &[EncodingTree] {
        &self.trees
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn codewords(&self) -> usize {
        self.k
    }

    pub fn chunk_order(&self) -> &ChunkOrder {
        &self.order
    }

    pub fn scratch(&self) -> ForestScratch {
        ForestScratch {
            partials: vec![vec![0.0; self.n]; self.trees.len()],
        }
    }

    /// Stats of every tree plus the summed memory footprint.
    pub fn stats(&self) -> Result<(Vec<TreeStats>, u64)> {
        let per_tree = self
            .trees
            .iter()
            .map(|t| t.stats())
            .collect::<Result<Vec<_>>>()?;
        let total = per_tree.iter().map(|s| s.memory_bytes).sum();
        Ok((per_tree, total))
    }

    /// out[slot] = sum over trees of that tree's partial distance.
    pub fn scan_into(
        &self,
        table: &DistanceTable,
        slots: &SlotMap,
        scratch: &mut ForestScratch,
        out: &mut [f32],
        threads: usize,
    ) -> Result<()> {
        if scratch.partials.len() != self.trees.len()
            || scratch.partials.iter().any(|p| p.len() != self.n)
        {
            return Err(Error::ConfigError("scratch shape mismatch".into()));
        }
        if threads > 1 && self.trees.len() > 1 {
            self.trees
                .par_iter()
                .zip(scratch.partials.par_iter_mut())
                .try_for_each(|(tree, partial)| tree.traverse_distances(table, slots, partial))?;
        } else {
            for (tree, partial) in self.trees.iter().zip(scratch.partials.iter_mut()) {
                tree.traverse_distances(table, slots, partial)?;
            }
        }
        sum_partials(&scratch.partials, out);
        Ok(())
    }

    /// Convenience wrapper allocating its own scratch.
    pub fn distances(&self, table: &DistanceTable, slots: &SlotMap) -> Result<Vec<f32>> {
        let mut scratch = self.scratch();
        let mut out = vec![0.0f32; self.n];
        self.scan_into(table, slots, &mut scratch, &mut out, 1)?;
        Ok(out)
    }

    /// Like [`Self::scan_into`], returning total table lookups across trees.
    pub fn scan_counted(
        &self,
        table: &DistanceTable,
        slots: &SlotMap,
        out: &mut [f32],
    ) -> Result<u64> {
        let mut scratch = self.scratch();
        let mut lookups = 0u64;
        for (tree, partial) in self.trees.iter().zip(scratch.partials.iter_mut()) {
            lookups += tree.traverse_distances_counted(table, slots, partial)?;
        }
        sum_partials(&scratch.partials, out);
        Ok(lookups)
    }
}

fn sum_partials(partials: &[Vec<f32>], out: &mut [f32]) {
    match partials {
        [single] => out.copy_from_slice(single),
        _ => {
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0f64;
                for p in partials {
                    acc += p[i] as f64;
                }
                *o = acc as f32;
            }
        }
    }
}
