//! Lloyd k-means used for codebook and coarse-quantizer training.

use rand::rngs::StdRng;
use rand::seq::index;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::vecset::squared_distance;

/// Outcome of a single k-means run.
pub struct KMeansRun {
    /// k centroids of `dim` values each, row-major.
    pub centroids: Vec<f32>,
    /// Nearest-centroid index per input point, from the final assignment pass.
    pub assignments: Vec<u32>,
    /// Sum of squared distances to the assigned centroid, one entry per iteration.
    pub objectives: Vec<f64>,
}

/// Runs Lloyd iterations on `n` points of dimension `dim` stored row-major.
///
/// Centroids are initialized from `k` distinct points sampled with `rng`.
/// A cluster left empty after an update step is re-seeded with the point
/// farthest from its currently assigned centroid.
pub fn lloyd(points: &[f32], dim: usize, k: usize, iterations: usize, rng: &mut StdRng) -> Result<KMeansRun> {
    let n = points.len() / dim;
    debug_assert_eq!(points.len(), n * dim);
    if n < k {
        return Err(Error::InsufficientData(format!(
            "{n} points for {k} centroids"
        )));
    }
    if k == 0 || iterations == 0 {
        return Err(Error::ConfigError(
            "k and iterations must be at least 1".into(),
        ));
    }

    let point = |i: usize| &points[i * dim..(i + 1) * dim];

    let mut centroids = vec![0.0f32; k * dim];
    for (slot, i) in index::sample(rng, n, k).into_iter().enumerate() {
        centroids[slot * dim..(slot + 1) * dim].copy_from_slice(point(i));
    }

    let mut assignments = vec![0u32; n];
    let mut distances = vec![0.0f64; n];
    let mut objectives = Vec::with_capacity(iterations);

    for _ in 0..iterations {
        // Assignment pass; ties break toward the smaller centroid index.
        let mut objective = 0.0f64;
        for i in 0..n {
            let p = point(i);
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, cent) in centroids.chunks_exact(dim).enumerate() {
                let d = squared_distance(p, cent);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            assignments[i] = best as u32;
            distances[i] = best_d;
            objective += best_d;
        }
        if let Some(prev) = objectives.last() {
            // Lloyd updates cannot increase the objective; allow only fp noise.
            assert!(
                objective <= prev * (1.0 + 1e-9) + 1e-12,
                "k-means objective increased: {prev} -> {objective}"
            );
        }
        objectives.push(objective);

        // Update pass: centroid = mean of assigned points, accumulated in f64.
        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0u32; k];
        for i in 0..n {
            let c = assignments[i] as usize;
            counts[c] += 1;
            let sum = &mut sums[c * dim..(c + 1) * dim];
            for (s, x) in sum.iter_mut().zip(point(i)) {
                *s += *x as f64;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            for d in 0..dim {
                centroids[c * dim + d] = (sums[c * dim + d] * inv) as f32;
            }
        }

        // Re-seed empty clusters from the points worst served by their centroid.
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut far = None;
            let mut far_d = -1.0f64;
            for i in 0..n {
                if !taken[i] && distances[i] > far_d {
                    far_d = distances[i];
                    far = Some(i);
                }
            }
            let i = far.expect("n >= k guarantees a reseed candidate");
            taken[i] = true;
            centroids[c * dim..(c + 1) * dim].copy_from_slice(point(i));
        }
    }

    // Final assignment so callers see clusters consistent with the returned centroids.
    for i in 0..n {
        let p = point(i);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (c, cent) in centroids.chunks_exact(dim).enumerate() {
            let d = squared_distance(p, cent);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        assignments[i] = best as u32;
    }

    Ok(KMeansRun {
        centroids,
        assignments,
        objectives,
    })
}

/// Derives an independent per-subspace seed from the training seed.
pub(crate) fn subspace_seed(seed: u64, subspace: usize) -> u64 {
    // SplitMix64 step keeps streams decorrelated across subspaces.
    let mut z = seed ^ (subspace as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_for_subspace(seed: u64, subspace: usize) -> StdRng {
    StdRng::seed_from_u64(subspace_seed(seed, subspace))
}
