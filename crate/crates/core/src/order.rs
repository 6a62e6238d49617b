//! Chunk orderings and lexicographic sorting of encoded datasets.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};

/// A permutation of the M chunk layers applied before tree construction.
///
/// Ordering affects tree size and scan speed, never distances. Two orders
/// compare equal when their permutations match; the seed is provenance only
/// and is not serialized.
#[derive(Debug, Clone, Eq)]
pub struct ChunkOrder {
    permutation: Vec<u8>,
    seed: Option<u64>,
}

impl PartialEq for ChunkOrder {
    fn eq(&self, other: &Self) -> bool {
        self.permutation == other.permutation
    }
}

impl ChunkOrder {
    /// The identity ordering.
    pub fn original(num_subspaces: usize) -> Self {
        Self {
            permutation: (0..num_subspaces as u8).collect(),
            seed: None,
        }
    }

    /// A seeded shuffle of the chunk layers.
    pub fn randomized(num_subspaces: usize, seed: u64) -> Self {
        let mut permutation: Vec<u8> = (0..num_subspaces as u8).collect();
        permutation.shuffle(&mut StdRng::seed_from_u64(seed));
        Self {
            permutation,
            seed: Some(seed),
        }
    }

    /// Wraps an explicit permutation of 0..M-1.
    pub fn from_permutation(permutation: Vec<u8>) -> Result<Self> {
        let m = permutation.len();
        if m == 0 || m > 127 {
            return Err(Error::ConfigError(format!(
                "chunk count {m} outside [1, 127]"
            )));
        }
        let mut seen = vec![false; m];
        for &p in &permutation {
            if (p as usize) >= m || seen[p as usize] {
                return Err(Error::ConfigError(format!(
                    "not a permutation of 0..{m}: {permutation:?}"
                )));
            }
            seen[p as usize] = true;
        }
        Ok(Self {
            permutation,
            seed: None,
        })
    }

    pub fn permutation(&self) -> &[u8] {
        &self.permutation
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.permutation
            .iter()
            .enumerate()
            .all(|(i, &p)| p as usize == i)
    }

    /// Seed used to shuffle, when this ordering came from [`ChunkOrder::randomized`].
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// The original chunk index feeding layer `layer`.
    #[inline]
    pub fn source_chunk(&self, layer: usize) -> usize {
        self.permutation[layer] as usize
    }
}

/// Reorders every code's chunks by `order` and sorts lexicographically.
///
/// The sort is stable: equal codes keep their input order, so ids attached
/// to duplicate codes stay in position order.
pub fn sort_encodings(ds: &EncodedDataset, order: &ChunkOrder) -> Result<EncodedDataset> {
    sort_projected(ds, order, 0, order.len())
}

/// Like [`sort_encodings`], restricted to the permuted layers
/// `[offset, offset + len)`. Used to build forest trees.
pub(crate) fn sort_projected(
    ds: &EncodedDataset,
    order: &ChunkOrder,
    offset: usize,
    len: usize,
) -> Result<EncodedDataset> {
    let m = ds.num_subspaces();
    if order.len() != m {
        return Err(Error::ConfigError(format!(
            "ordering over {} layers applied to {}-chunk codes",
            order.len(),
            m
        )));
    }
    if len == 0 || offset + len > m {
        return Err(Error::ConfigError(format!(
            "layer range [{offset}, {}) outside [0, {m})",
            offset + len
        )));
    }
    let n = ds.len();
    let mut projected = vec![0u8; n * len];
    for i in 0..n {
        let code = ds.code(i);
        for (o, &p) in projected[i * len..(i + 1) * len]
            .iter_mut()
            .zip(&order.permutation[offset..offset + len])
        {
            *o = code[p as usize];
        }
    }

    let mut index: Vec<u32> = (0..n as u32).collect();
    index.sort_by(|&a, &b| {
        let ca = &projected[a as usize * len..(a as usize + 1) * len];
        let cb = &projected[b as usize * len..(b as usize + 1) * len];
        ca.cmp(cb)
    });

    let mut codes = Vec::with_capacity(n * len);
    let mut ids = Vec::with_capacity(n);
    for &i in &index {
        codes.extend_from_slice(&projected[i as usize * len..(i as usize + 1) * len]);
        ids.push(ds.ids()[i as usize]);
    }
    EncodedDataset::from_parts(len, ds.codewords(), codes, ids)
}
