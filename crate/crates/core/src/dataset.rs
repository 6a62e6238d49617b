//! Encoded datasets: N codes of M one-byte chunks plus their vector ids.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::vecset::VectorSet;

/// N codes stored flat (one byte per chunk) together with N distinct ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    num_subspaces: usize,
    codewords: usize,
    codes: Vec<u8>,
    ids: Vec<u32>,
}

impl EncodedDataset {
    pub fn from_parts(
        num_subspaces: usize,
        codewords: usize,
        codes: Vec<u8>,
        ids: Vec<u32>,
    ) -> Result<Self> {
        if num_subspaces == 0 || codewords == 0 || codewords > 256 {
            return Err(Error::ConfigError(format!(
                "invalid shape m={num_subspaces}, K={codewords}"
            )));
        }
        if codes.len() != ids.len() * num_subspaces {
            return Err(Error::ConfigError(format!(
                "{} code bytes do not hold {} codes of {} chunks",
                codes.len(),
                ids.len(),
                num_subspaces
            )));
        }
        if codewords < 256 {
            if let Some(pos) = codes.iter().position(|&c| c as usize >= codewords) {
                return Err(Error::InvalidCode(format!(
                    "chunk {} at byte {} exceeds K={}",
                    codes[pos], pos, codewords
                )));
            }
        }
        let mut seen = HashMap::with_capacity(ids.len());
        for (i, &id) in ids.iter().enumerate() {
            if let Some(prev) = seen.insert(id, i) {
                return Err(Error::ConfigError(format!(
                    "duplicate id {id} at positions {prev} and {i}"
                )));
            }
        }
        Ok(Self {
            num_subspaces,
            codewords,
            codes,
            ids,
        })
    }

    /// Encodes every vector, assigning ids by position.
    pub fn encode(codebook: &Codebook, data: &VectorSet, threads: usize) -> Result<Self> {
        if data.dim() != codebook.dim() {
            return Err(Error::DimensionError {
                expected: codebook.dim(),
                got: data.dim(),
            });
        }
        if data.len() > u32::MAX as usize {
            return Err(Error::ConfigError("dataset exceeds 32-bit ids".into()));
        }
        let m = codebook.num_subspaces();
        let codes = if threads > 1 {
            let per: Vec<Vec<u8>> = (0..data.len())
                .into_par_iter()
                .map(|i| codebook.encode(data.get(i)))
                .collect::<Result<_>>()?;
            per.concat()
        } else {
            let mut codes = Vec::with_capacity(data.len() * m);
            for v in data.iter() {
                codes.extend_from_slice(&codebook.encode(v)?);
            }
            codes
        };
        let ids = (0..data.len() as u32).collect();
        Self::from_parts(m, codebook.codewords(), codes, ids)
    }

    pub fn num_subspaces(&self) -> usize {
        self.num_subspaces
    }

    pub fn codewords(&self) -> usize {
        self.codewords
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn code(&self, i: usize) -> &[u8] {
        &self.codes[i * self.num_subspaces..(i + 1) * self.num_subspaces]
    }

    pub fn codes_flat(&self) -> &[u8] {
        &self.codes
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u8], u32)> + '_ {
        self.codes
            .chunks_exact(self.num_subspaces)
            .zip(self.ids.iter().copied())
    }

    /// Maps each id back to its position in this dataset.
    pub fn slot_map(&self) -> SlotMap {
        SlotMap::new(&self.ids)
    }
}

/// Dense id-to-position lookup used to scatter scan results.
///
/// When ids are exactly 0..N-1 the lookup is the identity; otherwise a hash
/// map is built once and shared across queries.
#[derive(Debug, Clone)]
pub enum SlotMap {
    Identity(usize),
    Mapped(HashMap<u32, u32>),
}

impl SlotMap {
    pub fn new(ids: &[u32]) -> Self {
        let identity = ids.iter().enumerate().all(|(i, &id)| id as usize == i);
        if identity {
            SlotMap::Identity(ids.len())
        } else {
            SlotMap::Mapped(
                ids.iter()
                    .enumerate()
                    .map(|(i, &id)| (id, i as u32))
                    .collect(),
            )
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SlotMap::Identity(n) => *n,
            SlotMap::Mapped(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn slot(&self, id: u32) -> usize {
        match self {
            SlotMap::Identity(_) => id as usize,
            SlotMap::Mapped(m) => m[&id] as usize,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_ids() {
        let r = EncodedDataset::from_parts(2, 4, vec![0, 1, 2, 3], vec![7, 7]);
        assert!(matches!(r, Err(Error::ConfigError(_))));
    }

    #[test]
    fn rejects_out_of_range_chunks() {
        let r = EncodedDataset::from_parts(2, 4, vec![0, 9], vec![0]);
        assert!(matches!(r, Err(Error::InvalidCode(_))));
    }

    #[test]
    fn slot_map_identity_and_mapped() {
        let dense = SlotMap::new(&[0, 1, 2]);
        assert!(matches!(dense, SlotMap::Identity(3)));
        assert_eq!(dense.slot(2), 2);

        let sparse = SlotMap::new(&[10, 3, 500]);
        assert_eq!(sparse.slot(500), 2);
        assert_eq!(sparse.slot(10), 0);
    }
}
