//! Per-query distance tables and the exhaustive ADC scan.

use rayon::prelude::*;

use crate::codebook::Codebook;
use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};
use crate::vecset::squared_distance;

/// M×K table of squared distances between query subvectors and codewords.
///
/// Rows are contiguous: row `m` holds the K entries for subspace `m`, so a
/// scan that walks one chunk layer touches a single block.
#[derive(Debug, Clone)]
pub struct DistanceTable {
    num_subspaces: usize,
    codewords: usize,
    entries: Vec<f32>,
}

impl DistanceTable {
    /// entries[m][k] = squared distance between the query's m-th subvector
    /// and codeword k of sub-codebook m.
    pub fn build(codebook: &Codebook, query: &[f32]) -> Result<Self> {
        if query.len() != codebook.dim() {
            return Err(Error::DimensionError {
                expected: codebook.dim(),
                got: query.len(),
            });
        }
        let m = codebook.num_subspaces();
        let k = codebook.codewords();
        let sd = codebook.sub_dim();
        let mut entries = Vec::with_capacity(m * k);
        for mi in 0..m {
            let sub = &query[mi * sd..(mi + 1) * sd];
            for ki in 0..k {
                entries.push(squared_distance(sub, codebook.codeword(mi, ki)) as f32);
            }
        }
        Ok(Self {
            num_subspaces: m,
            codewords: k,
            entries,
        })
    }

    pub fn from_entries(num_subspaces: usize, codewords: usize, entries: Vec<f32>) -> Result<Self> {
        if entries.len() != num_subspaces * codewords {
            return Err(Error::ConfigError(format!(
                "expected {} entries, got {}",
                num_subspaces * codewords,
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::ConfigError(
                "table entries must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            num_subspaces,
            codewords,
            entries,
        })
    }

    pub fn num_subspaces(&self) -> usize {
        self.num_subspaces
    }

    pub fn codewords(&self) -> usize {
        self.codewords
    }

    #[inline]
    pub fn row(&self, m: usize) -> &[f32] {
        &self.entries[m * self.codewords..(m + 1) * self.codewords]
    }

    #[inline]
    pub fn entry(&self, m: usize, k: usize) -> f32 {
        self.entries[m * self.codewords + k]
    }
}

/// Sum of the M table entries selected by `code`, accumulated in f64.
#[inline]
pub fn adc_distance(table: &DistanceTable, code: &[u8]) -> f32 {
    debug_assert_eq!(code.len(), table.num_subspaces);
    let k = table.codewords;
    let mut acc = 0.0f64;
    for (row, &chunk) in table.entries.chunks_exact(k).zip(code.iter()) {
        acc += row[chunk as usize] as f64;
    }
    acc as f32
}

/// Exhaustive scan: out[i] = adc_distance(table, code i).
///
/// This is the oracle the tree traversal is validated against.
pub fn adc_scan(table: &DistanceTable, ds: &EncodedDataset, threads: usize) -> Result<Vec<f32>> {
    if ds.num_subspaces() != table.num_subspaces || ds.codewords() != table.codewords {
        return Err(Error::ConfigError(format!(
            "table is {}x{}, dataset is {}x{}",
            table.num_subspaces,
            table.codewords,
            ds.num_subspaces(),
            ds.codewords()
        )));
    }
    let m = ds.num_subspaces();
    if threads > 1 {
        let mut out = vec![0.0f32; ds.len()];
        out.par_chunks_mut(4096)
            .zip(ds.codes_flat().par_chunks(4096 * m))
            .for_each(|(out_chunk, codes)| {
                for (o, code) in out_chunk.iter_mut().zip(codes.chunks_exact(m)) {
                    *o = adc_distance(table, code);
                }
            });
        Ok(out)
    } else {
        Ok(ds
            .codes_flat()
            .chunks_exact(m)
            .map(|code| adc_distance(table, code))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::train_pq;
    use crate::vecset::VectorSet;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn setup(seed: u64) -> (Codebook, VectorSet) {
        let mut rng = StdRng::seed_from_u64(seed);
        let data: Vec<f32> = (0..200 * 12).map(|_| rng.random::<f32>()).collect();
        let set = VectorSet::from_flat(12, data).unwrap();
        let cb = train_pq(&set, 4, 8, 6, seed, 1).unwrap();
        (cb, set)
    }

    #[test]
    fn zero_rows_for_matching_codewords() {
        let (cb, _) = setup(1);
        let mut q = Vec::new();
        for m in 0..4 {
            q.extend_from_slice(cb.codeword(m, 0));
        }
        let t = DistanceTable::build(&cb, &q).unwrap();
        for m in 0..4 {
            assert_eq!(t.entry(m, 0), 0.0);
        }
    }

    #[test]
    fn all_zero_codebook_and_query() {
        let cb = Codebook::from_parts(4, 2, 2, vec![0.0; 8]).unwrap();
        let t = DistanceTable::build(&cb, &[0.0; 4]).unwrap();
        assert!(t.entries.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn entry_matches_direct_computation() {
        let (cb, _) = setup(2);
        let mut rng = StdRng::seed_from_u64(77);
        let q: Vec<f32> = (0..12).map(|_| rng.random::<f32>()).collect();
        let t = DistanceTable::build(&cb, &q).unwrap();
        let direct = squared_distance(&q[2 * 3..3 * 3], cb.codeword(2, 5)) as f32;
        assert!((t.entry(2, 5) - direct).abs() <= f32::EPSILON * direct.abs());
    }

    #[test]
    fn adc_distance_matches_decoded_euclidean() {
        let (cb, _) = setup(3);
        let mut rng = StdRng::seed_from_u64(55);
        for _ in 0..100 {
            let q: Vec<f32> = (0..12).map(|_| rng.random::<f32>()).collect();
            let code: Vec<u8> = (0..4).map(|_| rng.random_range(0..8) as u8).collect();
            let t = DistanceTable::build(&cb, &q).unwrap();
            let got = adc_distance(&t, &code) as f64;
            let want = squared_distance(&q, &cb.decode(&code).unwrap());
            assert!(
                (got - want).abs() <= 1e-5 * want.max(1e-12),
                "{got} vs {want}"
            );
        }
    }

    #[test]
    fn distance_is_zero_when_query_equals_decode() {
        let (cb, _) = setup(4);
        let code = [3u8, 1, 7, 0];
        let q = cb.decode(&code).unwrap();
        let t = DistanceTable::build(&cb, &q).unwrap();
        assert!(adc_distance(&t, &code) < 1e-10);
    }

    #[test]
    fn single_subspace_reads_one_entry() {
        let cb = Codebook::from_parts(2, 1, 4, vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0]).unwrap();
        let t = DistanceTable::build(&cb, &[0.5, 0.5]).unwrap();
        let code = [2u8];
        assert_eq!(adc_distance(&t, &code), t.entry(0, 2));
    }

    #[test]
    fn scan_equals_per_code_distance() {
        let (cb, data) = setup(5);
        let ds = EncodedDataset::encode(&cb, &data, 1).unwrap();
        let mut rng = StdRng::seed_from_u64(6);
        let q: Vec<f32> = (0..12).map(|_| rng.random::<f32>()).collect();
        let t = DistanceTable::build(&cb, &q).unwrap();
        let out = adc_scan(&t, &ds, 1).unwrap();
        assert_eq!(out.len(), ds.len());
        for i in 0..ds.len() {
            assert_eq!(out[i], adc_distance(&t, ds.code(i)));
        }
        // Parallel scan writes the same values into the same slots.
        assert_eq!(adc_scan(&t, &ds, 4).unwrap(), out);
    }

    #[test]
    fn scan_handles_empty_and_single() {
        let (cb, data) = setup(7);
        let empty = EncodedDataset::from_parts(4, 8, vec![], vec![]).unwrap();
        let one = EncodedDataset::from_parts(4, 8, vec![1, 2, 3, 4], vec![9]).unwrap();
        let q = data.get(0);
        let t = DistanceTable::build(&cb, q).unwrap();
        assert!(adc_scan(&t, &empty, 1).unwrap().is_empty());
        let out = adc_scan(&t, &one, 1).unwrap();
        assert_eq!(out, vec![adc_distance(&t, &[1, 2, 3, 4])]);
    }

    #[test]
    fn scan_rejects_mismatched_shapes() {
        let (cb, data) = setup(8);
        let ds = EncodedDataset::from_parts(2, 8, vec![0, 1], vec![0]).unwrap();
        let t = DistanceTable::build(&cb, data.get(0)).unwrap();
        assert!(matches!(
            adc_scan(&t, &ds, 1),
            Err(Error::ConfigError(_))
        ));
    }

    #[test]
    fn rows_are_permutation_covariant() {
        let (cb, _) = setup(9);
        let mut rng = StdRng::seed_from_u64(31);
        let q: Vec<f32> = (0..12).map(|_| rng.random::<f32>()).collect();
        let base = DistanceTable::build(&cb, &q).unwrap();

        // Swap two codewords inside sub-codebook 1 and rebuild.
        let sd = cb.sub_dim();
        let mut centroids = cb.centroids_flat().to_vec();
        let a = (cb.codewords() + 2) * sd;
        let b = (cb.codewords() + 6) * sd;
        for i in 0..sd {
            centroids.swap(a + i, b + i);
        }
        let permuted = Codebook::from_parts(12, 4, 8, centroids).unwrap();
        let t = DistanceTable::build(&permuted, &q).unwrap();

        assert_eq!(t.entry(1, 2), base.entry(1, 6));
        assert_eq!(t.entry(1, 6), base.entry(1, 2));
        for k in 0..8 {
            assert_eq!(t.entry(0, k), base.entry(0, k));
            assert_eq!(t.entry(3, k), base.entry(3, k));
        }
    }
}
