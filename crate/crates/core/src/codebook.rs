//! Product-quantization codebooks: training, encoding and decoding.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kmeans;
use crate::vecset::{squared_distance, VectorSet};

/// Chunks may not exceed one byte; the tree layout stores one chunk per byte.
pub const MAX_CODEWORDS: usize = 256;

/// `num_subspaces` sub-codebooks of `codewords` centroids each.
///
/// Centroids are stored flat in (subspace, codeword, coordinate) order.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    num_subspaces: usize,
    codewords: usize,
    centroids: Vec<f32>,
}

impl Codebook {
    pub fn from_parts(
        dim: usize,
        num_subspaces: usize,
        codewords: usize,
        centroids: Vec<f32>,
    ) -> Result<Self> {
        validate_shape(dim, num_subspaces, codewords)?;
        if centroids.len() != num_subspaces * codewords * (dim / num_subspaces) {
            return Err(Error::ConfigError(format!(
                "expected {} centroid values, got {}",
                num_subspaces * codewords * (dim / num_subspaces),
                centroids.len()
            )));
        }
        if centroids.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidVector("non-finite centroid".into()));
        }
        Ok(Self {
            dim,
            num_subspaces,
            codewords,
            centroids,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_subspaces(&self) -> usize {
        self.num_subspaces
    }

    pub fn codewords(&self) -> usize {
        self.codewords
    }

    pub fn sub_dim(&self) -> usize {
        self.dim / self.num_subspaces
    }

    pub fn centroids_flat(&self) -> &[f32] {
        &self.centroids
    }

    /// Codeword `k` of sub-codebook `m`.
    pub fn codeword(&self, m: usize, k: usize) -> &[f32] {
        let sd = self.sub_dim();
        let base = (m * self.codewords + k) * sd;
        &self.centroids[base..base + sd]
    }

    /// Nearest codeword per subspace; ties break toward the smaller index.
    pub fn encode(&self, v: &[f32]) -> Result<Vec<u8>> {
        if v.len() != self.dim {
            return Err(Error::DimensionError {
                expected: self.dim,
                got: v.len(),
            });
        }
        let sd = self.sub_dim();
        let mut code = Vec::with_capacity(self.num_subspaces);
        for m in 0..self.num_subspaces {
            let sub = &v[m * sd..(m + 1) * sd];
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for k in 0..self.codewords {
                let d = squared_distance(sub, self.codeword(m, k));
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            code.push(best as u8);
        }
        Ok(code)
    }

    /// Concatenation of the selected codewords.
    pub fn decode(&self, code: &[u8]) -> Result<Vec<f32>> {
        if code.len() != self.num_subspaces {
            return Err(Error::InvalidCode(format!(
                "code has {} chunks, codebook has {} subspaces",
                code.len(),
                self.num_subspaces
            )));
        }
        let mut out = Vec::with_capacity(self.dim);
        for (m, &chunk) in code.iter().enumerate() {
            if chunk as usize >= self.codewords {
                return Err(Error::InvalidCode(format!(
                    "chunk {} out of range for K={}",
                    chunk, self.codewords
                )));
            }
            out.extend_from_slice(self.codeword(m, chunk as usize));
        }
        Ok(out)
    }
}

fn validate_shape(dim: usize, num_subspaces: usize, codewords: usize) -> Result<()> {
    if num_subspaces == 0 || dim == 0 {
        return Err(Error::ConfigError("dim and m must be positive".into()));
    }
    if dim % num_subspaces != 0 {
        return Err(Error::InvalidSubspaceSplit {
            d: dim,
            m: num_subspaces,
        });
    }
    if codewords == 0 || codewords > MAX_CODEWORDS {
        return Err(Error::ConfigError(format!(
            "K must be in [1, {MAX_CODEWORDS}], got {codewords}"
        )));
    }
    Ok(())
}

/// Trains one k-means codebook per subspace.
///
/// Each subspace draws its own rng stream from `seed`, so results do not
/// depend on whether subspaces run sequentially or in parallel.
pub fn train_pq(
    data: &VectorSet,
    num_subspaces: usize,
    codewords: usize,
    iterations: usize,
    seed: u64,
    threads: usize,
) -> Result<Codebook> {
    validate_shape(data.dim(), num_subspaces, codewords)?;
    if iterations == 0 {
        return Err(Error::ConfigError("iterations must be at least 1".into()));
    }
    if data.len() < codewords {
        return Err(Error::InsufficientData(format!(
            "{} vectors for K={}",
            data.len(),
            codewords
        )));
    }
    data.validate_finite()?;

    let dim = data.dim();
    let sd = dim / num_subspaces;
    let n = data.len();

    let train_one = |m: usize| -> Result<Vec<f32>> {
        let mut sub = Vec::with_capacity(n * sd);
        for v in data.iter() {
            sub.extend_from_slice(&v[m * sd..(m + 1) * sd]);
        }
        let mut rng = kmeans::rng_for_subspace(seed, m);
        Ok(kmeans::lloyd(&sub, sd, codewords, iterations, &mut rng)?.centroids)
    };

    let per_subspace: Vec<Vec<f32>> = if threads > 1 {
        (0..num_subspaces)
            .into_par_iter()
            .map(train_one)
            .collect::<Result<_>>()?
    } else {
        (0..num_subspaces)
            .map(train_one)
            .collect::<Result<_>>()?
    };

    let mut centroids = Vec::with_capacity(num_subspaces * codewords * sd);
    for c in per_subspace {
        centroids.extend_from_slice(&c);
    }
    Codebook::from_parts(dim, num_subspaces, codewords, centroids)
}
