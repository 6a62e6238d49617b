//! Compressed prefix tree over sorted encodings, serialized flat.
//!
//! Nodes are stored in depth-first order as 2-byte headers. An internal
//! record is `[chunk][depth<<1]`; a leaf record is
//! `[chunk][count<<1 | 1][postfix][count x 4-byte ids]`, where the postfix
//! holds the remaining chunk layers of the single code group the leaf covers.
//! Groups larger than 127 ids are emitted as consecutive leaf records with
//! identical chunk and postfix.
//!
//! Leaf records do not encode their own depth, and the stored depth of the
//! next internal record is not enough to recover it when one leaf follows
//! another across a backtrack. A per-leaf depth track is therefore kept next
//! to the byte buffer; the buffer itself stays byte-exact with the
//! `4N + 2(L1+L2) + total_postfix` accounting.

mod build;
mod parse;
mod traverse;

pub use build::construct;
pub use parse::{ParsedRecord, Records};
pub use traverse::DistanceContext;

use crate::dataset::{EncodedDataset, SlotMap};
use crate::error::{Error, Result};
use crate::order::{sort_encodings, ChunkOrder};
use crate::table::DistanceTable;

/// Most ids a single leaf record can carry (7-bit count field).
pub const MAX_LEAF_IDS: usize = 127;

/// A serialized encoding tree covering a contiguous range of chunk layers.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingTree {
    n: u32,
    k: u32,
    order: ChunkOrder,
    layer_offset: u32,
    layer_count: u32,
    bytes: Vec<u8>,
    leaf_depths: Vec<u8>,
}

impl EncodingTree {
    /// Sorts `ds` under `order` and builds a tree over all M layers.
    pub fn build(ds: &EncodedDataset, order: &ChunkOrder, threads: usize) -> Result<Self> {
        let sorted = sort_encodings(ds, order)?;
        construct_with_threads(&sorted, order, 0, threads)
    }

    /// Number of ids stored on the tree's leaves.
    pub fn len(&self) -> usize {
        self.n as usize
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn codewords(&self) -> usize {
        self.k as usize
    }

    /// Total chunk layers of the dataset the tree belongs to.
    pub fn global_layers(&self) -> usize {
        self.order.len()
    }

    /// First global chunk layer this tree covers.
    pub fn layer_offset(&self) -> usize {
        self.layer_offset as usize
    }

    /// Number of chunk layers this tree covers.
    pub fn layer_count(&self) -> usize {
        self.layer_count as usize
    }

    pub fn chunk_order(&self) -> &ChunkOrder {
        &self.order
    }

    /// The flat node buffer.
    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Depth of each leaf record, in buffer order.
    pub fn leaf_depths(&self) -> &[u8] {
        &self.leaf_depths
    }

    /// Buffer size; equals `4N + 2(L1 + L2) + total_postfix`.
    pub fn memory_bytes(&self) -> usize {
        self.bytes.len()
    }

    /// Reassembles a tree from its serialized parts, validating it fully.
    pub fn from_parts(
        n: u32,
        k: u32,
        order: ChunkOrder,
        layer_offset: u32,
        layer_count: u32,
        bytes: Vec<u8>,
        leaf_depths: Vec<u8>,
    ) -> Result<Self> {
        if layer_count == 0
            || layer_offset as usize + layer_count as usize > order.len()
            || k == 0
            || k > 256
        {
            return Err(Error::ConfigError(format!(
                "layers [{layer_offset}, {}) with K={k} do not fit an order of {} layers",
                layer_offset + layer_count,
                order.len()
            )));
        }
        let tree = Self {
            n,
            k,
            order,
            layer_offset,
            layer_count,
            bytes,
            leaf_depths,
        };
        tree.validate()?;
        Ok(tree)
    }

    /// Table rows answering layer `j` of this tree, resolved through the
    /// chunk ordering.
    pub(crate) fn table_rows<'t>(&self, table: &'t DistanceTable) -> Result<Vec<&'t [f32]>> {
        if table.num_subspaces() != self.global_layers() || table.codewords() != self.k as usize {
            return Err(Error::ConfigError(format!(
                "table is {}x{}, tree expects {}x{}",
                table.num_subspaces(),
                table.codewords(),
                self.global_layers(),
                self.k
            )));
        }
        Ok((0..self.layer_count as usize)
            .map(|j| table.row(self.order.source_chunk(self.layer_offset as usize + j)))
            .collect())
    }

    /// Writes the approximate distance for every stored id into `out`.
    ///
    /// `out[slots.slot(id)]` receives the same value `adc_distance` produces
    /// for that id's code (restricted to this tree's layers).
    pub fn traverse_distances(
        &self,
        table: &DistanceTable,
        slots: &SlotMap,
        out: &mut [f32],
    ) -> Result<()> {
        traverse::run(self, table, slots, out, &mut traverse::NoTally)
    }

    /// Same as [`Self::traverse_distances`], returning the number of table
    /// lookups performed: one per internal node, one per leaf chunk, one per
    /// postfix byte.
    pub fn traverse_distances_counted(
        &self,
        table: &DistanceTable,
        slots: &SlotMap,
        out: &mut [f32],
    ) -> Result<u64> {
        let mut tally = traverse::CountTally(0);
        traverse::run(self, table, slots, out, &mut tally)?;
        Ok(tally.0)
    }
}

/// Node and size statistics gathered by a full parse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeStats {
    /// Internal node count (L1).
    pub internal_nodes: u64,
    /// Leaf record count (L2); chained records count individually.
    pub leaf_records: u64,
    /// Sum of leaf postfix lengths in bytes.
    pub total_postfix: u64,
    /// L1 + L2.
    pub node_count: u64,
    /// total_postfix / L2.
    pub avg_postfix: f64,
    /// 4N + 2(L1 + L2) + total_postfix; always equals the buffer length.
    pub memory_bytes: u64,
}

impl TreeStats {
    pub fn formula_bytes(n: u64, internal: u64, leaves: u64, total_postfix: u64) -> u64 {
        4 * n + 2 * (internal + leaves) + total_postfix
    }
}

/// Builds a tree from pre-sorted codes, optionally splitting construction
/// across worker threads at top-level subtree boundaries.
pub fn construct_with_threads(
    sorted: &EncodedDataset,
    order: &ChunkOrder,
    layer_offset: usize,
    threads: usize,
) -> Result<EncodingTree> {
    build::construct_impl(sorted, order, layer_offset, threads.max(1))
}
