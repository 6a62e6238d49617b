//! Non-exhaustive search: coarse quantizer + residual codes, with per-list
//! encoding trees in place of the flat ADC scan.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::codebook::{train_pq, Codebook};
use crate::dataset::{EncodedDataset, SlotMap};
use crate::eforest::{EncodingForest, ForestConfig};
use crate::error::{Error, Result};
use crate::io::{read_codebook, read_tree_from, write_codebook, write_tree_to};
use crate::kmeans;
use crate::table::{adc_scan, DistanceTable};
use crate::topk::{Neighbor, TopK};
use crate::vecset::{squared_distance, VectorSet};

const IVF_MAGIC: &[u8; 4] = b"ETIV";
const IVF_VERSION: u32 = 1;

/// Top-k result: ascending distance, ties toward the smaller id.
pub type QueryResult = Vec<Neighbor>;

/// Full-dimensional centroids selecting which inverted lists a query probes.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseQuantizer {
    dim: usize,
    centroids: Vec<f32>,
}

impl CoarseQuantizer {
    pub fn cells(&self) -> usize {
        self.centroids.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, c: usize) -> &[f32] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    /// The `w` nearest centroids, ascending by distance then index.
    pub fn probe(&self, query: &[f32], w: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = (0..self.cells())
            .map(|c| (c, squared_distance(query, self.centroid(c))))
            .collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(w);
        all
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Bucket {
    /// Global ids in local slot order.
    pub ids: Vec<u32>,
    /// Residual codes keyed by local ids 0..n_b.
    pub codes: EncodedDataset,
    pub forest: Option<EncodingForest>,
}

/// Inverted index with one shared residual codebook and a per-list tree.
#[derive(Debug, Clone, PartialEq)]
pub struct IvfIndex {
    coarse: CoarseQuantizer,
    codebook: Codebook,
    buckets: Vec<Bucket>,
    trees_per_list: usize,
}

/// Wall time spent in each search phase, in nanoseconds.
#[derive(Debug, Default, Clone, Copy)]
pub struct SearchProfile {
    pub coarse_ns: u64,
    pub table_ns: u64,
    pub scan_ns: u64,
    pub merge_ns: u64,
}

/// Which per-bucket distance kernel a search uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanBackend {
    /// Tree traversal over the bucket's encoding forest.
    Tree,
    /// Flat ADC over the bucket's codes; the oracle path.
    Adc,
}

/// Builds an IVF index: coarse k-means over the full vectors, one shared
/// codebook over all residuals, per-bucket trees over the residual codes.
#[allow(clippy::too_many_arguments)]
pub fn build_ivf(
    data: &VectorSet,
    coarse_cells: usize,
    num_subspaces: usize,
    codewords: usize,
    iterations: usize,
    seed: u64,
    trees_per_list: usize,
    threads: usize,
) -> Result<IvfIndex> {
    if coarse_cells == 0 {
        return Err(Error::ConfigError("coarse cell count must be positive".into()));
    }
    if data.len() < coarse_cells {
        return Err(Error::InsufficientData(format!(
            "{} vectors for {} coarse cells",
            data.len(),
            coarse_cells
        )));
    }
    if trees_per_list == 0 || trees_per_list > num_subspaces {
        return Err(Error::ConfigError(format!(
            "trees_per_list {trees_per_list} outside [1, {num_subspaces}]"
        )));
    }
    data.validate_finite()?;

    let dim = data.dim();
    let mut rng = StdRng::seed_from_u64(seed);
    let run = kmeans::lloyd(data.as_flat(), dim, coarse_cells, iterations, &mut rng)?;
    let coarse = CoarseQuantizer {
        dim,
        centroids: run.centroids,
    };

    let mut residuals = VectorSet::with_capacity(dim, data.len());
    let mut residual = vec![0.0f32; dim];
    for (i, v) in data.iter().enumerate() {
        let centroid = coarse.centroid(run.assignments[i] as usize);
        for ((r, &x), &c) in residual.iter_mut().zip(v).zip(centroid) {
            *r = x - c;
        }
        residuals.push(&residual);
    }

    let codebook = train_pq(
        &residuals,
        num_subspaces,
        codewords,
        iterations,
        seed.wrapping_add(0x9E37_79B9_7F4A_7C15),
        threads,
    )?;
    let encoded = EncodedDataset::encode(&codebook, &residuals, threads)?;

    let mut members: Vec<Vec<u32>> = vec![Vec::new(); coarse_cells];
    for (i, &a) in run.assignments.iter().enumerate() {
        members[a as usize].push(i as u32);
    }

    let order = crate::order::ChunkOrder::original(num_subspaces);
    let config = ForestConfig::even(num_subspaces, trees_per_list)?;
    let buckets = members
        .into_iter()
        .map(|ids| {
            let mut codes = Vec::with_capacity(ids.len() * num_subspaces);
            for &id in &ids {
                codes.extend_from_slice(encoded.code(id as usize));
            }
            let local_ids = (0..ids.len() as u32).collect();
            let codes =
                EncodedDataset::from_parts(num_subspaces, codewords, codes, local_ids)?;
            let forest = if codes.is_empty() {
                None
            } else {
                Some(EncodingForest::build(&codes, &order, &config, threads)?)
            };
            Ok(Bucket { ids, codes, forest })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(IvfIndex {
        coarse,
        codebook,
        buckets,
        trees_per_list,
    })
}

impl IvfIndex {
    pub fn coarse(&self) -> &CoarseQuantizer {
        &self.coarse
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn cells(&self) -> usize {
        self.buckets.len()
    }

    pub fn trees_per_list(&self) -> usize {
        self.trees_per_list
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(|b| b.ids.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bucket_sizes(&self) -> Vec<usize> {
        self.buckets.iter().map(|b| b.ids.len()).collect()
    }

    /// Probes the `w` nearest cells and merges per-bucket distances into a
    /// top-k result.
    pub fn search(&self, query: &[f32], w: usize, k: usize) -> Result<QueryResult> {
        Ok(self.search_profiled(query, w, k, ScanBackend::Tree)?.0)
    }

    /// Same candidates and distances as [`Self::search`], computed with the
    /// flat ADC kernel per bucket.
    pub fn search_adc(&self, query: &[f32], w: usize, k: usize) -> Result<QueryResult> {
        Ok(self.search_profiled(query, w, k, ScanBackend::Adc)?.0)
    }

    pub fn search_profiled(
        &self,
        query: &[f32],
        w: usize,
        k: usize,
        backend: ScanBackend,
    ) -> Result<(QueryResult, SearchProfile)> {
        if w == 0 || w > self.buckets.len() {
            return Err(Error::ConfigError(format!(
                "probe count {w} outside [1, {}]",
                self.buckets.len()
            )));
        }
        if query.len() != self.coarse.dim {
            return Err(Error::DimensionError {
                expected: self.coarse.dim,
                got: query.len(),
            });
        }

        let mut profile = SearchProfile::default();
        let t0 = Instant::now();
        let probed = self.coarse.probe(query, w);
        profile.coarse_ns += t0.elapsed().as_nanos() as u64;

        let mut top = TopK::new(k);
        let mut residual = vec![0.0f32; self.coarse.dim];
        let mut distances: Vec<f32> = Vec::new();
        for &(cell, _) in &probed {
            let bucket = &self.buckets[cell];
            if bucket.ids.is_empty() {
                continue;
            }

            // The residual query differs per probed cell, so the table is
            // built lazily here.
            let t1 = Instant::now();
            let centroid = self.coarse.centroid(cell);
            for ((r, &q), &c) in residual.iter_mut().zip(query).zip(centroid) {
                *r = q - c;
            }
            let table = DistanceTable::build(&self.codebook, &residual)?;
            profile.table_ns += t1.elapsed().as_nanos() as u64;

            let t2 = Instant::now();
            distances.clear();
            match backend {
                ScanBackend::Tree => {
                    let forest = bucket.forest.as_ref().expect("non-empty bucket has a forest");
                    distances.resize(bucket.ids.len(), 0.0);
                    let slots = SlotMap::Identity(bucket.ids.len());
                    let mut scratch = forest.scratch();
                    forest.scan_into(&table, &slots, &mut scratch, &mut distances, 1)?;
                }
                ScanBackend::Adc => {
                    distances = adc_scan(&table, &bucket.codes, 1)?;
                }
            }
            profile.scan_ns += t2.elapsed().as_nanos() as u64;

            let t3 = Instant::now();
            for (slot, &d) in distances.iter().enumerate() {
                top.push(bucket.ids[slot], d);
            }
            profile.merge_ns += t3.elapsed().as_nanos() as u64;
        }
        Ok((top.into_sorted(), profile))
    }

    /// Fraction of `truth` rows whose first entry shows up in the top `r`
    /// ids of the corresponding result.
    pub fn recall_at(results: &[QueryResult], truth: &[Vec<i32>], r: usize) -> f64 {
        let mut hits = 0usize;
        let mut total = 0usize;
        for (res, gt) in results.iter().zip(truth.iter()) {
            let Some(&nn) = gt.first() else { continue };
            total += 1;
            if res.iter().take(r).any(|n| n.id as i64 == nn as i64) {
                hits += 1;
            }
        }
        if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        }
    }

    /// Writes `codebook.etcb` and `index.etiv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_codebook(&dir.join("codebook.etcb"), &self.codebook)?;
        let mut w = BufWriter::new(File::create(dir.join("index.etiv"))?);
        w.write_all(IVF_MAGIC)?;
        w.write_u32::<LittleEndian>(IVF_VERSION)?;
        w.write_u32::<LittleEndian>(self.coarse.dim as u32)?;
        w.write_u32::<LittleEndian>(self.cells() as u32)?;
        w.write_u32::<LittleEndian>(self.trees_per_list as u32)?;
        for &x in &self.coarse.centroids {
            w.write_f32::<LittleEndian>(x)?;
        }
        for bucket in &self.buckets {
            w.write_u32::<LittleEndian>(bucket.ids.len() as u32)?;
            for &id in &bucket.ids {
                w.write_u32::<LittleEndian>(id)?;
            }
            w.write_all(bucket.codes.codes_flat())?;
            match &bucket.forest {
                Some(forest) => {
                    w.write_u8(1)?;
                    write_tree_to(&mut w, forest)?;
                }
                None => w.write_u8(0)?,
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let codebook = read_codebook(&dir.join("codebook.etcb"))?;
        let mut r = BufReader::new(File::open(dir.join("index.etiv"))?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != IVF_MAGIC {
            return Err(Error::MalformedFile {
                offset: 0,
                msg: "not an ivf index file".into(),
            });
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != IVF_VERSION {
            return Err(Error::MalformedFile {
                offset: 4,
                msg: format!("unsupported ivf version {version}"),
            });
        }
        let dim = r.read_u32::<LittleEndian>()? as usize;
        let cells = r.read_u32::<LittleEndian>()? as usize;
        let trees_per_list = r.read_u32::<LittleEndian>()? as usize;
        if dim != codebook.dim() {
            return Err(Error::ConfigError(format!(
                "index dim {dim} disagrees with codebook dim {}",
                codebook.dim()
            )));
        }
        let mut centroids = vec![0.0f32; cells * dim];
        r.read_f32_into::<LittleEndian>(&mut centroids)?;
        let m = codebook.num_subspaces();
        let buckets = (0..cells)
            .map(|_| {
                let n_b = r.read_u32::<LittleEndian>()? as usize;
                let mut ids = vec![0u32; n_b];
                r.read_u32_into::<LittleEndian>(&mut ids)?;
                let mut codes = vec![0u8; n_b * m];
                r.read_exact(&mut codes)?;
                let codes = EncodedDataset::from_parts(
                    m,
                    codebook.codewords(),
                    codes,
                    (0..n_b as u32).collect(),
                )?;
                let forest = match r.read_u8()? {
                    0 => None,
                    1 => Some(read_tree_from(&mut r)?),
                    other => {
                        return Err(Error::MalformedFile {
                            offset: 0,
                            msg: format!("bad forest marker {other}"),
                        })
                    }
                };
                Ok(Bucket { ids, codes, forest })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            coarse: CoarseQuantizer { dim, centroids },
            codebook,
            buckets,
            trees_per_list,
        })
    }
}
